#pragma once

// Discrete grid-world mazes in a small ASCII format:
//
//   #  wall        .  free        S  start (exactly one)
//   K  key         D  door        T  treasure        A  apple
//
// Actions are 0 east, 1 south, 2 west, 3 north. Positions are (column, row)
// with row 0 at the bottom of the map, so "north" increases y.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pose/env.hpp"

namespace pose {

enum class Cell : char {
  wall = '#',
  free = '.',
  start = 'S',
  key = 'K',
  door = 'D',
  treasure = 'T',
  apple = 'A',
};

struct GridRewards {
  double key = 2.0;
  double door = 4.0;
  double treasure = 10.0;
  double apple = 2.0;
};

namespace grid_goal {
inline constexpr int treasure = 0;
inline constexpr int apple = 1;
}  // namespace grid_goal

enum class GridAction : int { east = 0, south = 1, west = 2, north = 3 };

class GridMaze final : public Environment {
 public:
  GridMaze(std::vector<std::vector<Cell>> rows_top_down, GridRewards rewards, std::size_t max_steps);

  Vec reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  [[nodiscard]] std::size_t observation_dim() const override { return has_key_cell_ ? 3 : 2; }
  [[nodiscard]] ActionSpace action_space() const override { return {4, 0}; }
  [[nodiscard]] Vec position() const override;
  [[nodiscard]] std::size_t max_steps() const override { return max_steps_; }
  [[nodiscard]] std::size_t steps_taken() const override { return steps_; }
  [[nodiscard]] int optimal_goal() const override { return grid_goal::treasure; }
  [[nodiscard]] Vec optimal_goal_position() const override;
  [[nodiscard]] double diameter() const override;
  [[nodiscard]] VisitGrid visit_grid() const override;
  [[nodiscard]] std::unique_ptr<Environment> clone() const override;

  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::size_t height() const noexcept { return height_; }
  /// Cell at (x, y) with y counted from the bottom row.
  [[nodiscard]] Cell at(std::size_t x, std::size_t y) const { return cells_[index(x, y)]; }
  [[nodiscard]] bool has_key() const noexcept { return has_key_; }
  [[nodiscard]] const GridRewards& rewards() const noexcept { return rewards_; }

  /// ASCII rendering of the static map (not the episode state).
  [[nodiscard]] std::string render() const;

 private:
  [[nodiscard]] std::size_t index(std::size_t x, std::size_t y) const { return y * width_ + x; }
  [[nodiscard]] Vec observe() const;

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Cell> cells_;
  GridRewards rewards_;
  std::size_t max_steps_ = 0;
  std::size_t start_x_ = 0;
  std::size_t start_y_ = 0;
  bool has_key_cell_ = false;

  std::size_t x_ = 0;
  std::size_t y_ = 0;
  bool has_key_ = false;
  bool key_taken_ = false;
  bool door_open_ = false;
  std::size_t steps_ = 0;
  std::uint64_t seed_ = 0;
};

/// Parses an ASCII map. Throws ParseError (with row and column) on ragged rows,
/// unknown glyphs, or a start count other than one.
GridMaze load_maze(std::string_view text, const GridRewards& rewards, std::size_t max_steps);

/// Names of the bundled maps accepted by `bundled_map`.
std::vector<std::string> bundled_map_names();
/// ASCII text of a bundled map; throws InvalidArgument for unknown names.
std::string bundled_map(std::string_view name);
/// Reward table a bundled map is designed for.
GridRewards bundled_rewards(std::string_view name);

}  // namespace pose
