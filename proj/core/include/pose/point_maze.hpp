#pragma once

// Kinematic point-mass maze with continuous 2-D actions. Each step moves the
// point by the action, clipped to a maximum length; a move whose segment
// crosses a wall is rejected and the point stays put. Entering a goal disc
// pays that goal's reward and ends the episode.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pose/env.hpp"

namespace pose {

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

struct DiscGoal {
  Eigen::Vector2d center;
  double radius = 0.5;
  double reward = 0.0;
};

struct PointMazeLayout {
  double width = 10.0;
  double height = 5.0;
  std::vector<Segment> walls;  // interior walls; the arena border is implicit
  Eigen::Vector2d start{5.0, 1.0};
  std::vector<DiscGoal> goals;
  double step_size = 0.5;
  std::size_t max_steps = 500;
  double visit_cell = 0.5;
  /// Standard deviation of Gaussian noise added to every move (0 = deterministic).
  double action_noise = 0.0;
};

/// True when segments [p, q] and [a, b] intersect (touching counts).
bool segments_intersect(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b);

class PointMaze final : public Environment {
 public:
  explicit PointMaze(PointMazeLayout layout);

  Vec reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  [[nodiscard]] std::size_t observation_dim() const override { return 2; }
  [[nodiscard]] ActionSpace action_space() const override { return {0, 2}; }
  [[nodiscard]] Vec position() const override { return position_; }
  [[nodiscard]] std::size_t max_steps() const override { return layout_.max_steps; }
  [[nodiscard]] std::size_t steps_taken() const override { return steps_; }
  [[nodiscard]] int optimal_goal() const override { return optimal_goal_; }
  [[nodiscard]] Vec optimal_goal_position() const override;
  [[nodiscard]] double diameter() const override;
  [[nodiscard]] VisitGrid visit_grid() const override;
  [[nodiscard]] std::unique_ptr<Environment> clone() const override;

  [[nodiscard]] const PointMazeLayout& layout() const noexcept { return layout_; }
  /// True when the open segment from `from` to `to` would cross a wall or leave the arena.
  [[nodiscard]] bool blocked(const Eigen::Vector2d& from, const Eigen::Vector2d& to) const;

 private:
  PointMazeLayout layout_;
  std::vector<Segment> all_walls_;
  int optimal_goal_ = -1;
  Eigen::Vector2d position_;
  std::size_t steps_ = 0;
  std::mt19937_64 rng_;
};

/// U-shaped maze mirroring the swimmer layout: a near goal worth 200 on the
/// left and a far goal worth 500 on the right behind a wall.
PointMazeLayout point_maze_preset(std::string_view name);
std::vector<std::string> point_maze_preset_names();

}  // namespace pose
