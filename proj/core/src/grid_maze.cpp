#include "pose/grid_maze.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace pose {

namespace {

// Two rooms: start bottom-left, apple in the top-left corner of the start room,
// treasure in the upper part of the right room behind a one-cell opening.
constexpr const char* kDeceptive15 =
    "###############\n"
    "#A....#.......#\n"
    "#.....#.......#\n"
    "#.....#....T..#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.....#.......#\n"
    "#.............#\n"
    "#S....#.......#\n"
    "#.....#.......#\n"
    "###############\n";

// Three rooms: start bottom-left, key bottom-right, treasure in the top room
// behind a locked door in the start room's ceiling.
constexpr const char* kKdt21 =
    "#####################\n"
    "#...................#\n"
    "#.........T.........#\n"
    "#...................#\n"
    "#...................#\n"
    "#...................#\n"
    "#...................#\n"
    "#...................#\n"
    "#...................#\n"
    "#...................#\n"
    "###D#################\n"
    "#.........#.........#\n"
    "#.........#.........#\n"
    "#.........#.........#\n"
    "#.........#.........#\n"
    "#...................#\n"
    "#.........#.........#\n"
    "#.........#.......K.#\n"
    "#.........#.........#\n"
    "#S........#.........#\n"
    "#####################\n";

// 25x25 multi-room deceptive maze: apple in the left-up room, treasure in the
// middle-up room.
constexpr const char* kDeceptive25 =
    "#########################\n"
    "#.......#.......#.......#\n"
    "#.A.....#...T...#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "####.#######.#######.####\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#...............#.......#\n"
    "#.......#...............#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "####.#######.#######.####\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#...............#.......#\n"
    "#.......#...............#\n"
    "#.......#.......#.......#\n"
    "#S......#.......#.......#\n"
    "#########################\n";

// 25x25 Key-Door-Treasure: key in the right-down room, door into the
// middle-up room holding the treasure.
constexpr const char* kKdt25 =
    "#########################\n"
    "#.......#.......#.......#\n"
    "#.......#...T...#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "####.#######D#######.####\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#...............#.......#\n"
    "#.......#...............#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "####.#######.#######.####\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#.......#.......#.......#\n"
    "#...............#.......#\n"
    "#.......#...............#\n"
    "#.......#.......#.....K.#\n"
    "#S......#.......#.......#\n"
    "#########################\n";

// Every action from the start collects the treasure.
constexpr const char* kTiny =
    "#T#\n"
    "TST\n"
    "#T#\n";

const std::map<std::string, const char*, std::less<>>& map_table() {
  static const std::map<std::string, const char*, std::less<>> table{
      {"deceptive15", kDeceptive15}, {"kdt21", kKdt21},   {"deceptive25", kDeceptive25},
      {"kdt25", kKdt25},             {"tiny", kTiny},
  };
  return table;
}

bool is_glyph(char c) {
  switch (c) {
    case '#': case '.': case 'S': case 'K': case 'D': case 'T': case 'A': return true;
    default: return false;
  }
}

}  // namespace

GridMaze::GridMaze(std::vector<std::vector<Cell>> rows, GridRewards rewards, std::size_t max_steps)
    : rewards_(rewards), max_steps_(max_steps) {
  if (rows.empty() || rows.front().empty()) throw InvalidArgument("grid maze must be nonempty");
  if (max_steps == 0) throw InvalidArgument("grid maze max_steps must be positive");
  height_ = rows.size();
  width_ = rows.front().size();
  cells_.resize(width_ * height_);
  std::size_t starts = 0;
  for (std::size_t r = 0; r < height_; ++r) {
    if (rows[r].size() != width_) throw InvalidArgument("grid maze rows must have equal length");
    const std::size_t y = height_ - 1 - r;
    for (std::size_t x = 0; x < width_; ++x) {
      const Cell c = rows[r][x];
      cells_[index(x, y)] = c;
      if (c == Cell::start) {
        ++starts;
        start_x_ = x;
        start_y_ = y;
      }
      if (c == Cell::key) has_key_cell_ = true;
    }
  }
  if (starts != 1) throw InvalidArgument("grid maze needs exactly one start cell");
  reset(0);
}

Vec GridMaze::observe() const {
  Vec obs(static_cast<Eigen::Index>(observation_dim()));
  const double sx = width_ > 1 ? static_cast<double>(width_ - 1) : 1.0;
  const double sy = height_ > 1 ? static_cast<double>(height_ - 1) : 1.0;
  obs(0) = (static_cast<double>(x_) - static_cast<double>(start_x_)) / sx;
  obs(1) = (static_cast<double>(y_) - static_cast<double>(start_y_)) / sy;
  if (has_key_cell_) obs(2) = has_key_ ? 1.0 : 0.0;
  return obs;
}

Vec GridMaze::position() const { return Eigen::Vector2d(static_cast<double>(x_), static_cast<double>(y_)); }

Vec GridMaze::reset(std::uint64_t seed) {
  seed_ = seed;
  x_ = start_x_;
  y_ = start_y_;
  has_key_ = false;
  key_taken_ = false;
  door_open_ = false;
  steps_ = 0;
  return observe();
}

StepResult GridMaze::step(const Action& action) {
  if (action.index < 0 || action.index > 3) {
    throw InvalidArgument("grid action must be one of 0 (east), 1 (south), 2 (west), 3 (north)");
  }
  if (steps_ >= max_steps_) throw InvalidArgument("grid maze: step after episode end");
  ++steps_;
  static constexpr int dx[4] = {1, 0, -1, 0};
  static constexpr int dy[4] = {0, -1, 0, 1};
  const auto nx = static_cast<long>(x_) + dx[action.index];
  const auto ny = static_cast<long>(y_) + dy[action.index];

  StepResult res;
  bool blocked = nx < 0 || ny < 0 || nx >= static_cast<long>(width_) || ny >= static_cast<long>(height_);
  Cell target = Cell::wall;
  if (!blocked) {
    target = at(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
    blocked = target == Cell::wall || (target == Cell::door && !has_key_ && !door_open_);
  }
  if (!blocked) {
    x_ = static_cast<std::size_t>(nx);
    y_ = static_cast<std::size_t>(ny);
    switch (target) {
      case Cell::key:
        if (!key_taken_) {
          key_taken_ = true;
          has_key_ = true;
          res.reward = rewards_.key;
        }
        break;
      case Cell::door:
        if (!door_open_) {
          door_open_ = true;
          res.reward = rewards_.door;
        }
        break;
      case Cell::treasure:
        res.reward = rewards_.treasure;
        res.done = true;
        res.goal = grid_goal::treasure;
        break;
      case Cell::apple:
        res.reward = rewards_.apple;
        res.done = true;
        res.goal = grid_goal::apple;
        break;
      default: break;
    }
  }
  if (!res.done && steps_ >= max_steps_) {
    res.done = true;
    res.truncated = true;
  }
  res.observation = observe();
  res.position = position();
  return res;
}

Vec GridMaze::optimal_goal_position() const {
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      if (at(x, y) == Cell::treasure) return Eigen::Vector2d(static_cast<double>(x), static_cast<double>(y));
    }
  }
  return Vec();
}

double GridMaze::diameter() const {
  return std::hypot(static_cast<double>(width_ - 1), static_cast<double>(height_ - 1));
}

VisitGrid GridMaze::visit_grid() const { return {width_, height_, 1.0, -0.5, -0.5}; }

std::unique_ptr<Environment> GridMaze::clone() const { return std::make_unique<GridMaze>(*this); }

std::string GridMaze::render() const {
  std::string out;
  out.reserve((width_ + 1) * height_);
  for (std::size_t r = 0; r < height_; ++r) {
    const std::size_t y = height_ - 1 - r;
    for (std::size_t x = 0; x < width_; ++x) out.push_back(static_cast<char>(at(x, y)));
    out.push_back('\n');
  }
  return out;
}

GridMaze load_maze(std::string_view text, const GridRewards& rewards, std::size_t max_steps) {
  std::vector<std::vector<Cell>> rows;
  std::size_t line = 1;
  std::size_t starts = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view row = text.substr(pos, end - pos);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    pos = end + 1;
    if (row.empty()) {
      // Blank lines are only allowed after the last row.
      if (text.find_first_not_of("\r\n", pos) != std::string_view::npos && pos < text.size()) {
        throw ParseError("maze: blank line inside map", line, 1);
      }
      ++line;
      continue;
    }
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!is_glyph(row[c])) {
        throw ParseError(std::string("maze: unknown glyph '") + row[c] + "'", line, c + 1);
      }
      if (row[c] == 'S' && ++starts > 1) throw ParseError("maze: more than one start cell", line, c + 1);
      cells.push_back(static_cast<Cell>(row[c]));
    }
    if (!rows.empty() && cells.size() != rows.front().size()) {
      throw ParseError("maze: row length " + std::to_string(cells.size()) + " differs from " +
                           std::to_string(rows.front().size()),
                       line, std::min(cells.size(), rows.front().size()) + 1);
    }
    rows.push_back(std::move(cells));
    ++line;
  }
  if (rows.empty()) throw ParseError("maze: empty map", 1, 1);
  if (starts == 0) throw ParseError("maze: no start cell", 1, 1);
  return GridMaze(std::move(rows), rewards, max_steps);
}

std::vector<std::string> bundled_map_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : map_table()) names.push_back(name);
  return names;
}

std::string bundled_map(std::string_view name) {
  const auto& table = map_table();
  auto it = table.find(name);
  if (it == table.end()) throw InvalidArgument("unknown bundled map '" + std::string(name) + "'");
  return it->second;
}

GridRewards bundled_rewards(std::string_view name) {
  GridRewards r;
  if (name.starts_with("kdt")) r.treasure = 4.0;
  if (name == "tiny") r.treasure = 1.0;
  return r;
}

}  // namespace pose
