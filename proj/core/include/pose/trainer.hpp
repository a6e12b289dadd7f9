#pragma once

// The training loop over a team of agents. Each iteration every agent collects
// a batch, offers it to its guidance memory and takes a policy improvement
// step; in pose mode with two or more agents an exploration step then pushes
// each agent away from the closest peer's reference trajectory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pose/config.hpp"

namespace pose {

struct Agent {
  std::size_t id = 0;
  PolicyParams policy;
  ValueParams value;
  Adam policy_opt;
  Adam value_opt;
  std::unique_ptr<Environment> env;
  GuidanceMemory memory;
  PenaltyState penalty;
  Rng rng;
  VisitationCounter visits;
};

/// One log row.
struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t agent_id = 0;
  double avg_return = 0.0;
  double success_rate = 0.0;
  double mean_hinge_distance = 0.0;
  double sigma = 0.0;
  /// The agent's distance to its closest peer (0 without peers).
  double diversity_value = 0.0;
  /// Measured KL of the accepted exploration step (0 when none was taken).
  double kl_after_explore = 0.0;
  double wall_time_ms = 0.0;
};

enum class ExplorePhase { none, first_order, trust_region };
const char* to_string(ExplorePhase phase);

struct ExploreRecord {
  std::size_t iteration = 0;
  std::size_t agent_id = 0;
  ExplorePhase phase = ExplorePhase::none;
  bool accepted = false;
  double kl = 0.0;
  std::size_t backtracks = 0;
};

inline constexpr const char* kTrainLogHeader =
    "iteration,agent_id,avg_return,success_rate,mean_hinge_distance,sigma,diversity_value,kl_after_explore,"
    "wall_time_ms";
inline constexpr const char* kExploreLogHeader = "iteration,agent_id,phase,accepted,kl,backtracks";

std::string format_record(const IterationRecord& r);
std::string format_record(const ExploreRecord& r);

/// Samples M complete episodes with the agent's policy. Every step carries
/// observation, action, reward, position after the move, log-probability and
/// value estimate. Visits are recorded in `visits` when given; a positive
/// `bonus_lambda` fills each step's count-based bonus.
Batch collect_rollouts(const PolicyParams& policy, const ValueParams* value, Environment& env, std::size_t episodes,
                       Rng& rng, VisitationCounter* visits = nullptr, double bonus_lambda = 0.0);

/// One episode taking the most likely action at every step.
Trajectory collect_reference_trajectory(const PolicyParams& policy, Environment& env, std::uint64_t seed = 0);

struct EvalResult {
  double avg_return = 0.0;
  double success_rate = 0.0;
};

/// Sampled-policy episodes; success means ending at the environment's optimal goal.
EvalResult evaluate(const PolicyParams& policy, Environment& env, std::size_t episodes, Rng& rng);

class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  /// Runs one iteration and returns its log rows (one per agent).
  std::vector<IterationRecord> iterate();

  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const std::vector<Agent>& agents() const noexcept { return agents_; }
  [[nodiscard]] std::vector<Agent>& agents() noexcept { return agents_; }
  /// Exploration outcomes of the last iteration.
  [[nodiscard]] const std::vector<ExploreRecord>& explore_records() const noexcept { return explore_; }
  /// Total environment steps taken in training rollouts, per agent.
  [[nodiscard]] const std::vector<std::uint64_t>& env_steps() const noexcept { return env_steps_; }

 private:
  struct AgentBatch;
  void improve(Agent& agent, AgentBatch& out);
  void explore(std::vector<AgentBatch>& batches);

  RunConfig cfg_;
  std::vector<Agent> agents_;
  std::vector<ExploreRecord> explore_;
  std::vector<std::uint64_t> env_steps_;
  std::size_t iteration_ = 0;
};

struct RunArtifacts {
  std::filesystem::path run_dir;
  std::filesystem::path train_log;
  std::filesystem::path explore_log;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> heatmaps;
  std::vector<EvalResult> evaluation;
  std::size_t rows = 0;
};

/// Run directory for a config: $POSE_RUN_DIR (or run.output_dir) / run name.
std::filesystem::path resolve_run_dir(const RunConfig& cfg);

using IterationObserver = std::function<void(const Trainer&, const std::vector<IterationRecord>&)>;

/// Full run with artifacts: config snapshot, train_log.csv, explore_log.csv,
/// heatmap_agent<i>.csv, memory_agent<i>.txt, checkpoints and eval.csv.
/// A non-finite update writes checkpoints of the current state and throws.
RunArtifacts run_training(const RunConfig& cfg, const IterationObserver& observer = nullptr);

}  // namespace pose
