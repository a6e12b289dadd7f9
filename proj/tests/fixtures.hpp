#pragma once

#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include "pose/trajectory.hpp"

namespace fixture {

inline pose::Vec v2(double x, double y) {
  pose::Vec v(2);
  v << x, y;
  return v;
}

// Trajectory visiting the given 2-D positions; observation equals position.
inline pose::Trajectory path(std::initializer_list<std::pair<double, double>> pts, double ret = 0.0) {
  pose::Trajectory t;
  for (auto [x, y] : pts) {
    pose::Step s;
    s.position = v2(x, y);
    s.observation = s.position;
    s.action = pose::Action::discrete(0);
    t.steps.push_back(s);
  }
  t.episode_return = ret;
  return t;
}

inline pose::Trajectory path(const std::vector<pose::Vec>& pts, double ret = 0.0) {
  pose::Trajectory t;
  for (const auto& p : pts) {
    pose::Step s;
    s.position = p;
    s.observation = p;
    s.action = pose::Action::discrete(0);
    t.steps.push_back(s);
  }
  t.episode_return = ret;
  return t;
}

inline std::vector<pose::Vec> random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim, double scale = 3.0) {
  std::normal_distribution<double> N(0.0, scale);
  std::vector<pose::Vec> out;
  for (std::size_t i = 0; i < n; ++i) {
    pose::Vec v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = N(rng);
    out.push_back(v);
  }
  return out;
}

// Random lattice points, which produce many duplicates.
inline std::vector<pose::Vec> random_cells(std::mt19937_64& rng, std::size_t n, int extent = 4) {
  std::uniform_int_distribution<int> U(0, extent);
  std::vector<pose::Vec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(v2(U(rng), U(rng)));
  return out;
}

}  // namespace fixture
