#include "pose/point_maze.hpp"

#include <cmath>
#include <limits>

namespace pose {

namespace {

double cross(const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); }

bool on_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

int orientation(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

}  // namespace

bool segments_intersect(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
  const int o1 = orientation(p, q, a);
  const int o2 = orientation(p, q, b);
  const int o3 = orientation(a, b, p);
  const int o4 = orientation(a, b, q);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, p, q)) return true;
  if (o2 == 0 && on_segment(b, p, q)) return true;
  if (o3 == 0 && on_segment(p, a, b)) return true;
  if (o4 == 0 && on_segment(q, a, b)) return true;
  return false;
}

PointMaze::PointMaze(PointMazeLayout layout) : layout_(std::move(layout)) {
  if (!(layout_.width > 0.0) || !(layout_.height > 0.0)) throw InvalidArgument("point maze arena must be nonempty");
  if (!(layout_.step_size > 0.0)) throw InvalidArgument("point maze step_size must be positive");
  if (layout_.max_steps == 0) throw InvalidArgument("point maze max_steps must be positive");
  if (layout_.goals.empty()) throw InvalidArgument("point maze needs at least one goal");
  const double w = layout_.width;
  const double h = layout_.height;
  all_walls_ = layout_.walls;
  all_walls_.push_back({{0, 0}, {w, 0}});
  all_walls_.push_back({{w, 0}, {w, h}});
  all_walls_.push_back({{w, h}, {0, h}});
  all_walls_.push_back({{0, h}, {0, 0}});
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < layout_.goals.size(); ++g) {
    if (layout_.goals[g].reward > best) {
      best = layout_.goals[g].reward;
      optimal_goal_ = static_cast<int>(g);
    }
  }
  reset(0);
}

bool PointMaze::blocked(const Eigen::Vector2d& from, const Eigen::Vector2d& to) const {
  for (const auto& s : all_walls_) {
    if (segments_intersect(from, to, s.a, s.b)) return true;
  }
  return false;
}

Vec PointMaze::reset(std::uint64_t seed) {
  rng_.seed(seed);
  position_ = layout_.start;
  steps_ = 0;
  Vec obs = Vec::Zero(2);
  return obs;
}

StepResult PointMaze::step(const Action& action) {
  if (action.value.size() != 2 || !action.value.allFinite()) {
    throw InvalidArgument("point maze action must be a finite 2-vector");
  }
  if (steps_ >= layout_.max_steps) throw InvalidArgument("point maze: step after episode end");
  ++steps_;
  Eigen::Vector2d move = action.value;
  const double len = move.norm();
  if (len > layout_.step_size) move *= layout_.step_size / len;
  if (layout_.action_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, layout_.action_noise);
    move.x() += noise(rng_);
    move.y() += noise(rng_);
  }
  const Eigen::Vector2d next = position_ + move;
  if (!blocked(position_, next)) position_ = next;

  StepResult res;
  for (std::size_t g = 0; g < layout_.goals.size(); ++g) {
    const auto& goal = layout_.goals[g];
    if ((position_ - goal.center).norm() <= goal.radius) {
      res.reward = goal.reward;
      res.done = true;
      res.goal = static_cast<int>(g);
      break;
    }
  }
  if (!res.done && steps_ >= layout_.max_steps) {
    res.done = true;
    res.truncated = true;
  }
  res.position = position_;
  Vec obs(2);
  obs(0) = (position_.x() - layout_.start.x()) / layout_.width;
  obs(1) = (position_.y() - layout_.start.y()) / layout_.height;
  res.observation = obs;
  return res;
}

Vec PointMaze::optimal_goal_position() const { return layout_.goals[static_cast<std::size_t>(optimal_goal_)].center; }

double PointMaze::diameter() const { return std::hypot(layout_.width, layout_.height); }

VisitGrid PointMaze::visit_grid() const {
  VisitGrid g;
  g.cell_size = layout_.visit_cell;
  g.width = static_cast<std::size_t>(std::ceil(layout_.width / layout_.visit_cell));
  g.height = static_cast<std::size_t>(std::ceil(layout_.height / layout_.visit_cell));
  return g;
}

std::unique_ptr<Environment> PointMaze::clone() const { return std::make_unique<PointMaze>(*this); }

PointMazeLayout point_maze_preset(std::string_view name) {
  PointMazeLayout l;
  if (name == "point-u") {
    l.width = 10.0;
    l.height = 5.0;
    l.start = {5.0, 1.0};
    // The far goal sits behind a wall rising from the floor; reaching it needs a
    // detour over the top of the wall.
    l.walls.push_back({{7.0, 0.0}, {7.0, 3.5}});
    l.goals.push_back({{1.0, 1.0}, 0.6, 200.0});
    l.goals.push_back({{9.0, 1.0}, 0.6, 500.0});
    return l;
  }
  if (name == "point-open") {
    l.width = 4.0;
    l.height = 4.0;
    l.start = {1.0, 1.0};
    l.goals.push_back({{3.0, 3.0}, 0.75, 1.0});
    l.max_steps = 50;
    return l;
  }
  throw InvalidArgument("unknown point maze preset '" + std::string(name) + "'");
}

std::vector<std::string> point_maze_preset_names() { return {"point-open", "point-u"}; }

}  // namespace pose
