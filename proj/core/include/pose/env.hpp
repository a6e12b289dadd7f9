#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pose/trajectory.hpp"
#include "pose/types.hpp"

namespace pose {

struct StepResult {
  Vec observation;
  double reward = 0.0;
  bool done = false;
  Vec position;
  /// Goal that terminated the episode, -1 otherwise.
  int goal = -1;
  /// True when the episode ended on the step limit rather than a goal.
  bool truncated = false;
};

struct ActionSpace {
  /// Number of discrete actions, 0 for a continuous space.
  std::size_t discrete = 0;
  /// Dimension of continuous actions, 0 for a discrete space.
  std::size_t continuous_dim = 0;

  [[nodiscard]] bool is_discrete() const noexcept { return discrete > 0; }
};

/// Axis-aligned lattice used to count visits. Cell (col, row) covers
/// [origin.x + col*cell, origin.x + (col+1)*cell) and likewise for y; row 0 is
/// the bottom of the map.
struct VisitGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
};

class VisitationCounter {
 public:
  VisitationCounter() = default;
  explicit VisitationCounter(VisitGrid grid);

  /// Records a visit and returns the cell index it fell into. Positions
  /// outside the lattice are clamped to the border cells.
  std::size_t record(const Vec& position);
  [[nodiscard]] std::size_t cell_of(const Vec& position) const;
  [[nodiscard]] std::uint64_t count(std::size_t cell) const { return counts_.at(cell); }
  [[nodiscard]] std::uint64_t total() const noexcept { return total_; }
  [[nodiscard]] const VisitGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  /// CSV matrix: first row "<width>,<height>", then `height` rows of `width`
  /// counts, top row of the map first.
  void write_csv(std::ostream& out) const;
  static VisitationCounter read_csv(std::istream& in);

 private:
  VisitGrid grid_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Count-based bonus lambda / sqrt(N) for a cell that has been visited N >= 1 times.
double exploration_bonus(const VisitationCounter& counter, std::size_t cell, double lambda);

/// Episodic environment with a uniform interface for grid and point mazes.
class Environment {
 public:
  virtual ~Environment() = default;

  /// Starts a new episode. The seed reseeds the environment's random stream.
  virtual Vec reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;

  [[nodiscard]] virtual std::size_t observation_dim() const = 0;
  [[nodiscard]] virtual ActionSpace action_space() const = 0;
  [[nodiscard]] virtual Vec position() const = 0;
  [[nodiscard]] virtual std::size_t max_steps() const = 0;
  [[nodiscard]] virtual std::size_t steps_taken() const = 0;
  /// Goal id counted as success (the highest-reward goal).
  [[nodiscard]] virtual int optimal_goal() const = 0;
  /// Position of the optimal goal, used as the ranking goal for memories when known.
  [[nodiscard]] virtual Vec optimal_goal_position() const = 0;
  /// Largest distance between two reachable positions (used for default radii).
  [[nodiscard]] virtual double diameter() const = 0;
  [[nodiscard]] virtual VisitGrid visit_grid() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace pose
