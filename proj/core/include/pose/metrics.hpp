#pragma once

// Behavior characterizations and kernel MMD distances between trajectories.
//
// A trajectory is treated as the uniform empirical distribution over the
// positions it visits. Distances are squared MMD values computed with a
// Gaussian RBF kernel and the biased (V-statistic) estimator, which is
// nonnegative for every sample.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pose/trajectory.hpp"
#include "pose/types.hpp"

namespace pose {

class GuidanceMemory;

struct BehaviorTrace {
  std::vector<Vec> points;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  [[nodiscard]] std::size_t dim() const noexcept {
    return points.empty() ? 0 : static_cast<std::size_t>(points.front().size());
  }
};

enum class BandwidthMode { median_heuristic, fixed };

struct KernelConfig {
  BandwidthMode bandwidth_mode = BandwidthMode::median_heuristic;
  double fixed_bandwidth = 1.0;
  /// Traces longer than this are subsampled at evenly spaced indices.
  std::size_t max_points = 200;

  void validate() const;
};

/// Position sequence of a trajectory, order preserved.
BehaviorTrace behavior_characterization(const Trajectory& traj);

double rbf_kernel(const Vec& x, const Vec& y, double bandwidth);

/// Median of the pairwise Euclidean distances over all unordered pairs of
/// X ∪ Y. Falls back to 1.0 when the median is zero.
double median_heuristic_bandwidth(std::span<const Vec> xs, std::span<const Vec> ys);

/// Biased V-statistic estimate of MMD², diagonal terms included.
double mmd_squared(std::span<const Vec> xs, std::span<const Vec> ys, const KernelConfig& cfg);

/// Evenly spaced indices selecting at most `max_points` of `n` items; the
/// first and last items are always kept.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t max_points);

/// A behavior trace reduced to distinct points with multiplicities, after
/// subsampling. MMD and the median heuristic are evaluated on the weighted
/// form, which gives the same values as the expanded multiset at a fraction
/// of the cost for grid trajectories that revisit cells.
struct CompactTrace {
  Mat points;  // dim x distinct
  Vec weights;  // multiplicity of each distinct point
  double total_weight = 0.0;

  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(points.rows()); }
  [[nodiscard]] std::size_t distinct() const noexcept {
    return static_cast<std::size_t>(points.cols());
  }
};

CompactTrace compact_trace(const BehaviorTrace& trace, std::size_t max_points);
CompactTrace compact_trace(const Trajectory& traj, const KernelConfig& cfg);

/// MMD² between two compact traces.
double trace_distance(const CompactTrace& a, const CompactTrace& b, const KernelConfig& cfg);

double traj_distance(const Trajectory& a, const Trajectory& b, const KernelConfig& cfg);

struct MemoryDistance {
  double distance = 0.0;
  std::optional<std::size_t> index;
};

/// Minimum distance from `traj` to the entries of `memory`; (0, none) when the
/// memory is empty.
MemoryDistance dist_to_memory(const Trajectory& traj, const GuidanceMemory& memory,
                              const KernelConfig& cfg);
MemoryDistance dist_to_memory(const CompactTrace& trace, const GuidanceMemory& memory,
                              const KernelConfig& cfg);

/// Zero inside the guidance tolerance, the memory distance outside it.
double hinge_distance(const Trajectory& traj, const GuidanceMemory& memory, double tolerance,
                      const KernelConfig& cfg);
double hinge_of(const MemoryDistance& d, double tolerance);

struct AgentDiversity {
  std::size_t agent_id = 0;
  double min_peer_distance = 0.0;
  std::optional<std::size_t> argmin_peer;
};

struct DiversityReport {
  double team_value = 0.0;
  std::vector<AgentDiversity> per_agent;
};

/// Mean over agents of the smallest peer distance, where an agent's distance to
/// peer j is the mean MMD² between its rollouts and j's reference trajectory.
DiversityReport team_diversity(std::span<const Batch> rollouts,
                               std::span<const Trajectory> reference_trajs,
                               const KernelConfig& cfg);

/// Same measure on precomputed traces: `rollout_traces[i]` holds agent i's
/// batch, `reference_traces[j]` agent j's reference trajectory.
DiversityReport team_diversity(std::span<const std::vector<CompactTrace>> rollout_traces,
                               std::span<const CompactTrace> reference_traces,
                               const KernelConfig& cfg);

}  // namespace pose
