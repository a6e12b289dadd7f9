#pragma once

#include <cstddef>
#include <vector>

#include "pose/types.hpp"

namespace pose {

/// An action for either action space. Discrete actions use `index`, continuous
/// actions use `value`; the unused member stays at its default.
struct Action {
  int index = -1;
  Vec value;

  static Action discrete(int i) { return Action{i, Vec()}; }
  static Action continuous(Vec v) { return Action{-1, std::move(v)}; }

  [[nodiscard]] bool is_discrete() const noexcept { return index >= 0; }
};

struct Step {
  Vec observation;
  Action action;
  double reward = 0.0;
  Vec position;
  double log_prob = 0.0;
  double value = 0.0;
  /// Intrinsic reward added to `reward` for advantage estimation only.
  double bonus = 0.0;
};

/// One episode. `goal_reached` names the goal the episode terminated on
/// (-1 for a timeout or a non-goal termination).
struct Trajectory {
  std::vector<Step> steps;
  double episode_return = 0.0;
  int goal_reached = -1;
  bool success = false;
  /// Value estimate of the state following the last step; used to bootstrap
  /// truncated (timeout) episodes.
  double bootstrap_value = 0.0;
  bool truncated = false;

  [[nodiscard]] std::size_t size() const noexcept { return steps.size(); }
  [[nodiscard]] bool empty() const noexcept { return steps.empty(); }
};

using Batch = std::vector<Trajectory>;

}  // namespace pose
