#include "pose/memory.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "pose/text_io.hpp"

namespace pose {

Vec embed(const Trajectory& traj) {
  if (traj.empty()) throw MalformedTrajectory("embed: trajectory has no steps");
  const Vec& p = traj.steps.back().position;
  if (p.size() == 0) throw MalformedTrajectory("embed: terminal step carries no position");
  return p;
}

bool is_similar(const Vec& e1, const Vec& e2, double radius) {
  if (e1.size() != e2.size()) throw InvalidArgument("is_similar: dimension mismatch");
  return (e1 - e2).norm() <= radius;
}

RankingKey ranking_key(const MemoryEntry& entry, const std::optional<Vec>& goal) {
  RankingKey key;
  key.ret = entry.ret;
  key.neg_steps = -static_cast<double>(entry.steps);
  if (goal && goal->size() == entry.embedding.size()) {
    key.neg_goal_distance = -(entry.embedding - *goal).norm();
  }
  return key;
}

const char* to_string(AdmitOutcome outcome) {
  switch (outcome) {
    case AdmitOutcome::admitted_new: return "admitted_new";
    case AdmitOutcome::replaced_worst: return "replaced_worst";
    case AdmitOutcome::rejected_dissimilar: return "rejected_dissimilar";
    case AdmitOutcome::rejected_worse: return "rejected_worse";
    case AdmitOutcome::reseeded: return "reseeded";
  }
  return "unknown";
}

GuidanceMemory::GuidanceMemory(MemorySettings settings) : settings_(std::move(settings)) {
  if (!(settings_.similarity_radius > 0.0)) {
    throw InvalidArgument("memory similarity_radius must be positive");
  }
}

MemoryEntry GuidanceMemory::make_entry(const Trajectory& traj, const KernelConfig& cfg) const {
  MemoryEntry e;
  e.embedding = embed(traj);
  e.traj = traj;
  e.steps = traj.size();
  e.ret = traj.episode_return;
  e.trace = compact_trace(traj, cfg);
  return e;
}

void GuidanceMemory::sort_entries() {
  // Stable so equal keys keep admission order, which keeps admission
  // deterministic.
  std::stable_sort(entries_.begin(), entries_.end(),
                   [&](const MemoryEntry& a, const MemoryEntry& b) { return key_of(a) > key_of(b); });
}

AdmitResult GuidanceMemory::try_admit(const Trajectory& traj, const KernelConfig& cfg) {
  if (traj.empty()) throw MalformedTrajectory("try_admit: trajectory has no steps");
  if (settings_.capacity == 0) return {AdmitOutcome::rejected_worse, std::nullopt};

  const Vec e = embed(traj);
  if (!anchor_) {
    entries_.push_back(make_entry(traj, cfg));
    anchor_ = e;
    return {AdmitOutcome::admitted_new, std::nullopt};
  }
  if (!is_similar(e, *anchor_, settings_.similarity_radius)) {
    if (settings_.reseed_on_higher_return && !entries_.empty() &&
        traj.episode_return > entries_.front().ret) {
      entries_.clear();
      entries_.push_back(make_entry(traj, cfg));
      anchor_ = e;
      return {AdmitOutcome::reseeded, std::nullopt};
    }
    return {AdmitOutcome::rejected_dissimilar, std::nullopt};
  }
  if (entries_.size() < settings_.capacity) {
    entries_.push_back(make_entry(traj, cfg));
    sort_entries();
    return {AdmitOutcome::admitted_new, std::nullopt};
  }
  // Cheap key comparison first; the MMD trace is only built on replacement.
  MemoryEntry probe;
  probe.embedding = e;
  probe.steps = traj.size();
  probe.ret = traj.episode_return;
  const std::size_t worst = entries_.size() - 1;
  if (key_of(probe) > key_of(entries_[worst])) {
    entries_[worst] = make_entry(traj, cfg);
    sort_entries();
    return {AdmitOutcome::replaced_worst, worst};
  }
  return {AdmitOutcome::rejected_worse, std::nullopt};
}

namespace {

void write_vec(std::ostream& out, const Vec& v) {
  out << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << text::format_double(v(i));
}

struct LineReader {
  std::istream& in;
  std::size_t line_no = 0;
  std::string line;

  std::vector<std::string_view> next(const char* what) {
    while (std::getline(in, line)) {
      ++line_no;
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      return text::split_ws(t);
    }
    throw ParseError(std::string("memory snapshot: unexpected end of input, expected ") + what, line_no + 1, 1);
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("memory snapshot: " + msg, line_no, 1); }

  double number(std::string_view s) const {
    double v = 0.0;
    if (!text::parse_double(s, v)) fail("bad number '" + std::string(s) + "'");
    return v;
  }

  std::size_t count(std::string_view s) const {
    std::size_t v = 0;
    if (!text::parse_int(s, v)) fail("bad count '" + std::string(s) + "'");
    return v;
  }

  // Parses "<tag> <dim> v1 ... vdim" or "<tag> none".
  std::optional<Vec> optional_vec(const std::vector<std::string_view>& tok, std::size_t from) const {
    if (tok.size() == from + 1 && tok[from] == "none") return std::nullopt;
    return vec(tok, from);
  }

  Vec vec(const std::vector<std::string_view>& tok, std::size_t from) const {
    if (tok.size() <= from) fail("missing vector");
    const std::size_t n = count(tok[from]);
    if (tok.size() != from + 1 + n) fail("vector length mismatch");
    Vec v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = number(tok[from + 1 + i]);
    return v;
  }
};

}  // namespace

void GuidanceMemory::save(std::ostream& out) const {
  out << "pose-memory 1\n";
  out << "capacity " << settings_.capacity << '\n';
  out << "radius " << text::format_double(settings_.similarity_radius) << '\n';
  out << "reseed " << (settings_.reseed_on_higher_return ? 1 : 0) << '\n';
  out << "goal ";
  if (settings_.goal_position) write_vec(out, *settings_.goal_position); else out << "none";
  out << "\nanchor ";
  if (anchor_) write_vec(out, *anchor_); else out << "none";
  out << "\nentries " << entries_.size() << '\n';
  for (const auto& e : entries_) {
    out << "entry " << text::format_double(e.ret) << ' ' << e.steps << ' ';
    write_vec(out, e.embedding);
    out << '\n';
    const auto dim = e.embedding.size();
    out << "positions";
    for (const auto& s : e.traj.steps) {
      for (Eigen::Index i = 0; i < dim; ++i) out << ' ' << text::format_double(s.position(i));
    }
    out << '\n';
  }
}

GuidanceMemory GuidanceMemory::load(std::istream& in, const KernelConfig& cfg) {
  LineReader r{in, 0, {}};
  auto tok = r.next("header");
  if (tok.size() != 2 || tok[0] != "pose-memory" || tok[1] != "1") r.fail("bad header");

  MemorySettings s;
  auto expect = [&](const char* tag) {
    auto t = r.next(tag);
    if (t.empty() || t[0] != tag) r.fail(std::string("expected '") + tag + "'");
    return t;
  };
  tok = expect("capacity");
  if (tok.size() != 2) r.fail("capacity takes one value");
  s.capacity = r.count(tok[1]);
  tok = expect("radius");
  if (tok.size() != 2) r.fail("radius takes one value");
  s.similarity_radius = r.number(tok[1]);
  tok = expect("reseed");
  if (tok.size() != 2) r.fail("reseed takes one value");
  s.reseed_on_higher_return = r.count(tok[1]) != 0;
  tok = expect("goal");
  s.goal_position = r.optional_vec(tok, 1);

  GuidanceMemory m(s);
  tok = expect("anchor");
  m.anchor_ = r.optional_vec(tok, 1);
  tok = expect("entries");
  if (tok.size() != 2) r.fail("entries takes one value");
  const std::size_t n = r.count(tok[1]);
  if (n > s.capacity) r.fail("more entries than capacity");
  for (std::size_t k = 0; k < n; ++k) {
    tok = expect("entry");
    if (tok.size() < 4) r.fail("entry record too short");
    const double ret = r.number(tok[1]);
    const std::size_t steps = r.count(tok[2]);
    const Vec emb = r.vec(tok, 3);
    tok = expect("positions");
    const auto dim = static_cast<std::size_t>(emb.size());
    if (dim == 0 || tok.size() - 1 != steps * dim) r.fail("position sequence does not match steps x dim");
    Trajectory traj;
    traj.episode_return = ret;
    traj.steps.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Vec p(static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < dim; ++i) p(static_cast<Eigen::Index>(i)) = r.number(tok[1 + t * dim + i]);
      traj.steps[t].position = std::move(p);
    }
    MemoryEntry e = m.make_entry(traj, cfg);
    if (e.embedding != emb) r.fail("embedding is not the terminal position");
    m.entries_.push_back(std::move(e));
  }
  m.sort_entries();
  return m;
}

}  // namespace pose
