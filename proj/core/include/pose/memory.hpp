#pragma once

// Per-agent guidance memory: a bounded store of the best trajectories that end
// near a common terminal embedding. Entries are ranked by return (higher is
// better), then by length (shorter is better), then by the distance of their
// embedding to a known goal (closer is better).

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pose/metrics.hpp"
#include "pose/trajectory.hpp"

namespace pose {

struct MemoryEntry {
  Trajectory traj;
  Vec embedding;
  std::size_t steps = 0;
  double ret = 0.0;
  CompactTrace trace;
};

/// Larger compares better. Steps and goal distance are stored negated so the
/// default lexicographic order implements the priority order directly.
struct RankingKey {
  double ret = 0.0;
  double neg_steps = 0.0;
  double neg_goal_distance = 0.0;

  auto operator<=>(const RankingKey&) const = default;
};

/// Terminal position of a nonempty trajectory.
Vec embed(const Trajectory& traj);

bool is_similar(const Vec& e1, const Vec& e2, double radius);

RankingKey ranking_key(const MemoryEntry& entry, const std::optional<Vec>& goal);

enum class AdmitOutcome {
  admitted_new,
  replaced_worst,
  rejected_dissimilar,
  rejected_worse,
  /// The trajectory out-earned every stored entry but ended elsewhere; the
  /// memory was cleared and re-anchored on it. Only when reseeding is enabled.
  reseeded,
};

struct AdmitResult {
  AdmitOutcome outcome = AdmitOutcome::rejected_worse;
  /// Position of the replaced entry (before re-sorting) for replaced_worst.
  std::optional<std::size_t> replaced_index;
};

const char* to_string(AdmitOutcome outcome);

struct MemorySettings {
  std::size_t capacity = 10;
  double similarity_radius = 1.0;
  std::optional<Vec> goal_position;
  bool reseed_on_higher_return = true;
};

class GuidanceMemory {
 public:
  GuidanceMemory() = default;
  explicit GuidanceMemory(MemorySettings settings);

  AdmitResult try_admit(const Trajectory& traj, const KernelConfig& cfg);

  [[nodiscard]] const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return settings_.capacity; }
  [[nodiscard]] double similarity_radius() const noexcept { return settings_.similarity_radius; }
  [[nodiscard]] const std::optional<Vec>& anchor() const noexcept { return anchor_; }
  [[nodiscard]] const std::optional<Vec>& goal_position() const noexcept { return settings_.goal_position; }
  [[nodiscard]] const MemorySettings& settings() const noexcept { return settings_; }

  [[nodiscard]] RankingKey key_of(const MemoryEntry& e) const { return ranking_key(e, settings_.goal_position); }

  /// Text snapshot: header, then one record per entry with return, steps,
  /// embedding and position sequence.
  void save(std::ostream& out) const;
  /// Restores a snapshot. Entries carry positions only; other step fields are
  /// left at their defaults.
  static GuidanceMemory load(std::istream& in, const KernelConfig& cfg);

 private:
  MemoryEntry make_entry(const Trajectory& traj, const KernelConfig& cfg) const;
  void sort_entries();

  MemorySettings settings_;
  std::vector<MemoryEntry> entries_;
  std::optional<Vec> anchor_;
};

}  // namespace pose
