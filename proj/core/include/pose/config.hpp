#pragma once

// Run configuration in a flat text format:
//
//   # comment
//   ppo.clip = 0.2
//   policy.hidden = 64,64
//
// Every key has a default; a file only lists what it changes. Unknown keys,
// duplicate keys and malformed values are errors carrying the line number.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pose/env.hpp"
#include "pose/grid_maze.hpp"
#include "pose/memory.hpp"
#include "pose/metrics.hpp"
#include "pose/optimization.hpp"
#include "pose/policy.hpp"

namespace pose {

enum class AgentMode { pose, ppo, ppo_exp };

const char* to_string(AgentMode mode);

struct EnvConfig {
  /// Bundled grid map or point-maze preset.
  std::string name = "deceptive15";
  /// ASCII map file; overrides `name` when set.
  std::string map_file;
  /// 0 keeps the environment's default step limit.
  std::size_t max_steps = 0;
  /// Grid rewards; unset entries use the map's bundled table.
  std::optional<double> reward_key;
  std::optional<double> reward_door;
  std::optional<double> reward_treasure;
  std::optional<double> reward_apple;
  /// Point maze move noise (standard deviation).
  double action_noise = 0.0;
};

struct NetworkConfig {
  std::vector<std::size_t> policy_hidden{64, 64};
  std::vector<std::size_t> value_hidden{64, 64};
  Activation activation = Activation::tanh;
  double init_log_std = 0.0;
};

struct MemoryConfig {
  std::size_t capacity = 10;
  double radius = 1.5;
  bool reseed = true;
  /// Rank ties by distance to the environment's optimal goal.
  bool use_goal = true;
  /// Only trajectories whose return exceeds this are offered to the memory.
  double min_return = 0.0;
};

struct RunConfig {
  AgentMode mode = AgentMode::pose;
  std::size_t agents = 3;
  /// Trajectories per agent per iteration.
  std::size_t batch_size = 8;
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
  /// 1 runs everything on the calling thread (bit-reproducible).
  std::size_t threads = 1;
  std::string output_dir = "runs";
  /// Run directory name under output_dir; empty derives "<mode>_seed<seed>".
  std::string name;
  /// Checkpoint every N iterations; 0 writes only the final checkpoint.
  std::size_t checkpoint_interval = 0;
  /// Sampled episodes per agent for the final evaluation; 0 skips it.
  std::size_t eval_episodes = 100;
  bool log_wall_time = true;

  EnvConfig env;
  NetworkConfig net;
  PPOConfig ppo;
  PenaltyState penalty;
  ExploreConfig explore;
  KernelConfig kernel;
  MemoryConfig memory;
  double bonus_lambda = 0.1;

  void validate() const;
};

/// Sets one dotted key from its text value. Throws InvalidArgument naming the
/// key for unknown keys or malformed values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
/// Applies a "key=value" override.
void apply_override(RunConfig& cfg, std::string_view assignment);

RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one "key = value" line each.
std::string format_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg);

}  // namespace pose
