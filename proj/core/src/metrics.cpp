#include "pose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pose/memory.hpp"

namespace pose {

void KernelConfig::validate() const {
  if (bandwidth_mode == BandwidthMode::fixed && !(fixed_bandwidth > 0.0)) {
    throw InvalidArgument("kernel fixed_bandwidth must be positive");
  }
  if (max_points < 2) throw InvalidArgument("kernel max_points must be at least 2");
}

BehaviorTrace behavior_characterization(const Trajectory& traj) {
  if (traj.empty()) throw MalformedTrajectory("trajectory has no steps");
  BehaviorTrace trace;
  trace.points.reserve(traj.size());
  const auto dim = traj.steps.front().position.size();
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Vec& p = traj.steps[t].position;
    if (p.size() == 0) {
      throw MalformedTrajectory("step " + std::to_string(t) + " carries no position");
    }
    if (p.size() != dim) {
      throw MalformedTrajectory("step " + std::to_string(t) + " has position dimension " +
                                std::to_string(p.size()) + ", expected " + std::to_string(dim));
    }
    trace.points.push_back(p);
  }
  return trace;
}

double rbf_kernel(const Vec& x, const Vec& y, double bandwidth) {
  if (x.size() != y.size()) throw InvalidArgument("rbf_kernel: dimension mismatch");
  if (!(bandwidth > 0.0)) throw InvalidArgument("rbf_kernel: bandwidth must be positive");
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

namespace {

void check_dims(std::span<const Vec> xs, std::span<const Vec> ys) {
  Eigen::Index dim = -1;
  for (auto set : {xs, ys}) {
    for (const Vec& p : set) {
      if (dim < 0) dim = p.size();
      if (p.size() != dim || dim == 0) throw InvalidArgument("point sets have mismatched dimensions");
    }
  }
}

// Weighted median over (value, multiplicity) pairs. For an even total count the
// two middle order statistics are averaged.
double weighted_median(std::vector<std::pair<double, double>>& items, double total) {
  std::sort(items.begin(), items.end());
  auto order_stat = [&](double rank) {
    double seen = 0.0;
    for (const auto& [value, count] : items) {
      seen += count;
      if (seen > rank) return value;
    }
    return items.back().first;
  };
  const double lo = std::floor((total - 1.0) / 2.0);
  const double hi = std::ceil((total - 1.0) / 2.0);
  return 0.5 * (order_stat(lo) + order_stat(hi));
}

// Pairwise squared distances between the columns of a and b, computed from
// differences so coincident points give exactly zero.
Mat pairwise_sq(const Mat& a, const Mat& b) {
  Mat d(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) d(i, j) = (a.col(i) - b.col(j)).squaredNorm();
  }
  return d;
}

double median_bandwidth(const CompactTrace& a, const CompactTrace& b, const Mat& daa,
                        const Mat& dab, const Mat& dbb) {
  const double n = a.total_weight + b.total_weight;
  std::vector<std::pair<double, double>> items;
  items.reserve(static_cast<std::size_t>((daa.size() + dbb.size()) / 2 + dab.size() + 1));
  double zero_pairs = 0.0;
  auto within = [&](const CompactTrace& t, const Mat& d) {
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const double wi = t.weights(i);
      zero_pairs += wi * (wi - 1.0) / 2.0;
      for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
        items.emplace_back(std::sqrt(d(i, j)), wi * t.weights(j));
      }
    }
  };
  within(a, daa);
  within(b, dbb);
  for (Eigen::Index i = 0; i < dab.rows(); ++i) {
    for (Eigen::Index j = 0; j < dab.cols(); ++j) {
      items.emplace_back(std::sqrt(dab(i, j)), a.weights(i) * b.weights(j));
    }
  }
  if (zero_pairs > 0.0) items.emplace_back(0.0, zero_pairs);
  const double pairs = n * (n - 1.0) / 2.0;
  const double med = weighted_median(items, pairs);
  return med > 0.0 ? med : 1.0;
}

CompactTrace compact_points(std::span<const Vec> points) {
  // Sort indices lexicographically and merge exact duplicates.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t i, std::size_t j) {
    const Vec& a = points[i];
    const Vec& b = points[j];
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  };
  std::stable_sort(order.begin(), order.end(), less);
  std::vector<std::size_t> heads;
  std::vector<double> counts;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!heads.empty() && points[heads.back()] == points[order[k]]) {
      counts.back() += 1.0;
    } else {
      heads.push_back(order[k]);
      counts.push_back(1.0);
    }
  }
  CompactTrace out;
  const auto dim = points.empty() ? 0 : points.front().size();
  out.points.resize(dim, static_cast<Eigen::Index>(heads.size()));
  out.weights.resize(static_cast<Eigen::Index>(heads.size()));
  for (std::size_t k = 0; k < heads.size(); ++k) {
    out.points.col(static_cast<Eigen::Index>(k)) = points[heads[k]];
    out.weights(static_cast<Eigen::Index>(k)) = counts[k];
  }
  out.total_weight = static_cast<double>(points.size());
  return out;
}

CompactTrace to_trace(std::span<const Vec> points) {
  CompactTrace t;
  const auto dim = points.front().size();
  t.points.resize(dim, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) t.points.col(static_cast<Eigen::Index>(i)) = points[i];
  t.weights = Vec::Ones(static_cast<Eigen::Index>(points.size()));
  t.total_weight = static_cast<double>(points.size());
  return t;
}

double weighted_mmd(const CompactTrace& a, const CompactTrace& b, const KernelConfig& cfg) {
  if (a.distinct() == 0 || b.distinct() == 0) throw InvalidArgument("mmd: empty point set");
  if (a.dim() != b.dim()) throw InvalidArgument("mmd: dimension mismatch");
  const Mat daa = pairwise_sq(a.points, a.points);
  const Mat dbb = pairwise_sq(b.points, b.points);
  const Mat dab = pairwise_sq(a.points, b.points);
  double h = cfg.fixed_bandwidth;
  if (cfg.bandwidth_mode == BandwidthMode::median_heuristic) {
    h = median_bandwidth(a, b, daa, dab, dbb);
  } else if (!(h > 0.0)) {
    throw InvalidArgument("mmd: fixed bandwidth must be positive");
  }
  const double scale = -1.0 / (2.0 * h * h);
  auto mean_kernel = [&](const Mat& d, const Vec& wa, const Vec& wb, double norm) {
    return wa.dot((d * scale).array().exp().matrix() * wb) / norm;
  };
  const double kaa = mean_kernel(daa, a.weights, a.weights, a.total_weight * a.total_weight);
  const double kbb = mean_kernel(dbb, b.weights, b.weights, b.total_weight * b.total_weight);
  const double kab = mean_kernel(dab, a.weights, b.weights, a.total_weight * b.total_weight);
  return std::max(0.0, kaa - 2.0 * kab + kbb);
}

}  // namespace

double median_heuristic_bandwidth(std::span<const Vec> xs, std::span<const Vec> ys) {
  if (xs.size() + ys.size() < 2) throw InvalidArgument("median heuristic needs at least two points");
  check_dims(xs, ys);
  std::vector<Vec> all(xs.begin(), xs.end());
  all.insert(all.end(), ys.begin(), ys.end());
  std::vector<double> d;
  d.reserve(all.size() * (all.size() - 1) / 2);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) d.push_back((all[i] - all[j]).norm());
  }
  const std::size_t n = d.size();
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(d.begin(), mid, d.end());
  // For even n the lower middle is the largest element left of mid.
  const double med = (n % 2 == 1) ? *mid : 0.5 * (*std::max_element(d.begin(), mid) + *mid);
  return med > 0.0 ? med : 1.0;
}

double mmd_squared(std::span<const Vec> xs, std::span<const Vec> ys, const KernelConfig& cfg) {
  if (xs.empty() || ys.empty()) throw InvalidArgument("mmd_squared: empty point set");
  check_dims(xs, ys);
  return weighted_mmd(to_trace(xs), to_trace(ys), cfg);
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (n <= max_points) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  idx.reserve(max_points);
  for (std::size_t k = 0; k < max_points; ++k) {
    // Integer arithmetic keeps the selection exact and reproducible.
    idx.push_back(k * (n - 1) / (max_points - 1));
  }
  return idx;
}

CompactTrace compact_trace(const BehaviorTrace& trace, std::size_t max_points) {
  if (trace.points.empty()) throw MalformedTrajectory("empty behavior trace");
  const auto idx = subsample_indices(trace.points.size(), max_points);
  std::vector<Vec> kept;
  kept.reserve(idx.size());
  for (auto i : idx) kept.push_back(trace.points[i]);
  return compact_points(kept);
}

CompactTrace compact_trace(const Trajectory& traj, const KernelConfig& cfg) {
  return compact_trace(behavior_characterization(traj), cfg.max_points);
}

double trace_distance(const CompactTrace& a, const CompactTrace& b, const KernelConfig& cfg) {
  return weighted_mmd(a, b, cfg);
}

double traj_distance(const Trajectory& a, const Trajectory& b, const KernelConfig& cfg) {
  return trace_distance(compact_trace(a, cfg), compact_trace(b, cfg), cfg);
}

MemoryDistance dist_to_memory(const CompactTrace& trace, const GuidanceMemory& memory,
                              const KernelConfig& cfg) {
  MemoryDistance best;
  const auto& entries = memory.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double d = trace_distance(trace, entries[i].trace, cfg);
    if (!best.index || d < best.distance) {
      best.distance = d;
      best.index = i;
    }
  }
  return best;
}

MemoryDistance dist_to_memory(const Trajectory& traj, const GuidanceMemory& memory,
                              const KernelConfig& cfg) {
  if (memory.empty()) return {};
  return dist_to_memory(compact_trace(traj, cfg), memory, cfg);
}

double hinge_of(const MemoryDistance& d, double tolerance) {
  return d.distance <= tolerance ? 0.0 : d.distance;
}

double hinge_distance(const Trajectory& traj, const GuidanceMemory& memory, double tolerance,
                      const KernelConfig& cfg) {
  if (!(tolerance > 0.0)) throw InvalidArgument("hinge_distance: tolerance must be positive");
  return hinge_of(dist_to_memory(traj, memory, cfg), tolerance);
}

DiversityReport team_diversity(std::span<const std::vector<CompactTrace>> rollout_traces,
                               std::span<const CompactTrace> reference_traces,
                               const KernelConfig& cfg) {
  const std::size_t k = rollout_traces.size();
  if (k == 0 || reference_traces.size() != k) {
    throw InvalidArgument("team_diversity: need one batch and one reference per agent");
  }
  DiversityReport report;
  report.per_agent.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& batch = rollout_traces[i];
    if (batch.empty()) throw InvalidArgument("team_diversity: agent " + std::to_string(i) + " has an empty batch");
    AgentDiversity& entry = report.per_agent[i];
    entry.agent_id = i;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      double mean = 0.0;
      for (const auto& trace : batch) mean += trace_distance(trace, reference_traces[j], cfg);
      mean /= static_cast<double>(batch.size());
      if (!entry.argmin_peer || mean < entry.min_peer_distance) {
        entry.min_peer_distance = mean;
        entry.argmin_peer = j;
      }
    }
  }
  if (k > 1) {
    double sum = 0.0;
    for (const auto& e : report.per_agent) sum += e.min_peer_distance;
    report.team_value = sum / static_cast<double>(k);
  }
  return report;
}

DiversityReport team_diversity(std::span<const Batch> rollouts, std::span<const Trajectory> reference_trajs,
                               const KernelConfig& cfg) {
  if (rollouts.size() != reference_trajs.size()) {
    throw InvalidArgument("team_diversity: need one batch and one reference per agent");
  }
  std::vector<std::vector<CompactTrace>> traces(rollouts.size());
  std::vector<CompactTrace> refs;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    for (const auto& t : rollouts[i]) traces[i].push_back(compact_trace(t, cfg));
    refs.push_back(compact_trace(reference_trajs[i], cfg));
  }
  return team_diversity(std::span<const std::vector<CompactTrace>>(traces), std::span<const CompactTrace>(refs), cfg);
}

}  // namespace pose
