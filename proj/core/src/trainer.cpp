#include "pose/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <thread>

#include "pose/text_io.hpp"

namespace pose {

const char* to_string(ExplorePhase phase) {
  switch (phase) {
    case ExplorePhase::none: return "none";
    case ExplorePhase::first_order: return "first_order";
    case ExplorePhase::trust_region: return "trust_region";
  }
  return "?";
}

std::string format_record(const IterationRecord& r) {
  using text::format_double;
  return std::to_string(r.iteration) + ',' + std::to_string(r.agent_id) + ',' + format_double(r.avg_return) + ',' +
         format_double(r.success_rate) + ',' + format_double(r.mean_hinge_distance) + ',' + format_double(r.sigma) +
         ',' + format_double(r.diversity_value) + ',' + format_double(r.kl_after_explore) + ',' +
         format_double(r.wall_time_ms);
}

std::string format_record(const ExploreRecord& r) {
  return std::to_string(r.iteration) + ',' + std::to_string(r.agent_id) + ',' + to_string(r.phase) + ',' +
         (r.accepted ? "1" : "0") + ',' + text::format_double(r.kl) + ',' + std::to_string(r.backtracks);
}

Batch collect_rollouts(const PolicyParams& policy, const ValueParams* value, Environment& env, std::size_t episodes,
                       Rng& rng, VisitationCounter* visits, double bonus_lambda) {
  if (episodes == 0) throw InvalidArgument("collect_rollouts: need at least one episode");
  Batch batch;
  batch.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    Trajectory traj;
    Vec obs = env.reset(rng());
    for (;;) {
      const ActionDistribution dist = policy_forward(policy, obs);
      Step step;
      step.action = sample_action(dist, rng);
      step.log_prob = log_prob(dist, step.action);
      step.value = value ? value_forward(*value, obs) : 0.0;
      step.observation = std::move(obs);
      const StepResult res = env.step(step.action);
      step.reward = res.reward;
      step.position = res.position;
      if (visits) {
        const std::size_t cell = visits->record(res.position);
        if (bonus_lambda > 0.0) step.bonus = exploration_bonus(*visits, cell, bonus_lambda);
      }
      traj.episode_return += res.reward;
      traj.steps.push_back(std::move(step));
      obs = res.observation;
      if (res.done) {
        traj.goal_reached = res.goal;
        traj.success = res.goal >= 0 && res.goal == env.optimal_goal();
        traj.truncated = res.truncated;
        if (res.truncated && value) traj.bootstrap_value = value_forward(*value, obs);
        break;
      }
    }
    batch.push_back(std::move(traj));
  }
  return batch;
}

Trajectory collect_reference_trajectory(const PolicyParams& policy, Environment& env, std::uint64_t seed) {
  Trajectory traj;
  Vec obs = env.reset(seed);
  for (;;) {
    const ActionDistribution dist = policy_forward(policy, obs);
    Step step;
    step.action = greedy_action(dist);
    step.log_prob = log_prob(dist, step.action);
    step.observation = std::move(obs);
    const StepResult res = env.step(step.action);
    step.reward = res.reward;
    step.position = res.position;
    traj.episode_return += res.reward;
    traj.steps.push_back(std::move(step));
    obs = res.observation;
    if (res.done) {
      traj.goal_reached = res.goal;
      traj.success = res.goal >= 0 && res.goal == env.optimal_goal();
      traj.truncated = res.truncated;
      break;
    }
  }
  return traj;
}

EvalResult evaluate(const PolicyParams& policy, Environment& env, std::size_t episodes, Rng& rng) {
  if (episodes == 0) throw InvalidArgument("evaluate: need at least one episode");
  const Batch batch = collect_rollouts(policy, nullptr, env, episodes, rng);
  EvalResult res;
  for (const auto& t : batch) {
    res.avg_return += t.episode_return;
    res.success_rate += t.success ? 1.0 : 0.0;
  }
  res.avg_return /= static_cast<double>(episodes);
  res.success_rate /= static_cast<double>(episodes);
  return res;
}

struct Trainer::AgentBatch {
  Batch batch;
  std::vector<CompactTrace> traces;
  SampleSet samples;
  IterationRecord record;
  std::uint64_t steps = 0;
};

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto prototype = make_environment(cfg_.env);
  const ActionSpace space = prototype->action_space();
  const HeadKind head = space.is_discrete() ? HeadKind::categorical : HeadKind::gaussian;
  const std::size_t out = space.is_discrete() ? space.discrete : space.continuous_dim;
  const Architecture parch =
      make_architecture(prototype->observation_dim(), cfg_.net.policy_hidden, out, head, cfg_.net.activation);
  const Architecture varch =
      make_architecture(prototype->observation_dim(), cfg_.net.value_hidden, 1, HeadKind::scalar, cfg_.net.activation);

  MemorySettings ms;
  ms.capacity = cfg_.memory.capacity;
  ms.similarity_radius = cfg_.memory.radius;
  ms.reseed_on_higher_return = cfg_.memory.reseed;
  if (cfg_.memory.use_goal) ms.goal_position = prototype->optimal_goal_position();

  agents_.resize(cfg_.agents);
  env_steps_.assign(cfg_.agents, 0);
  for (std::size_t i = 0; i < cfg_.agents; ++i) {
    Agent& a = agents_[i];
    a.id = i;
    a.rng.seed(cfg_.seed + i);
    a.policy = init_policy(parch, a.rng, cfg_.net.init_log_std);
    a.value = init_value(varch, a.rng);
    a.policy_opt = Adam(parch.param_count(), cfg_.ppo.learning_rate);
    a.value_opt = Adam(varch.param_count(), cfg_.ppo.learning_rate);
    a.env = prototype->clone();
    a.memory = GuidanceMemory(ms);
    a.penalty = cfg_.penalty;
    a.visits = VisitationCounter(prototype->visit_grid());
  }
}

void Trainer::improve(Agent& agent, AgentBatch& out) {
  const bool pose_mode = cfg_.mode == AgentMode::pose;
  const double lambda = cfg_.mode == AgentMode::ppo_exp ? cfg_.bonus_lambda : 0.0;
  out.batch = collect_rollouts(agent.policy, &agent.value, *agent.env, cfg_.batch_size, agent.rng, &agent.visits, lambda);

  IterationRecord& rec = out.record;
  rec.iteration = iteration_;
  rec.agent_id = agent.id;
  for (const auto& t : out.batch) {
    out.steps += t.size();
    rec.avg_return += t.episode_return;
    rec.success_rate += t.success ? 1.0 : 0.0;
  }
  const double m = static_cast<double>(out.batch.size());
  rec.avg_return /= m;
  rec.success_rate /= m;

  std::vector<double> hinge;
  if (pose_mode) {
    for (const auto& t : out.batch) {
      if (t.episode_return > cfg_.memory.min_return) agent.memory.try_admit(t, cfg_.kernel);
    }
    out.traces.reserve(out.batch.size());
    hinge.reserve(out.batch.size());
    for (const auto& t : out.batch) {
      out.traces.push_back(compact_trace(t, cfg_.kernel));
      hinge.push_back(hinge_of(dist_to_memory(out.traces.back(), agent.memory, cfg_.kernel), agent.penalty.tolerance));
    }
    rec.mean_hinge_distance = std::accumulate(hinge.begin(), hinge.end(), 0.0) / m;
    if (agent.penalty.baseline) {
      for (double& h : hinge) h -= rec.mean_hinge_distance;
    }
  }

  out.samples = build_samples(out.batch, hinge, cfg_.ppo);
  const double sigma = pose_mode ? agent.penalty.sigma : 0.0;
  PPOConfig ppo = cfg_.ppo;
  ppo.entropy_coef = ppo.entropy_at(iteration_, cfg_.iterations);
  const ImprovementStats stats = policy_improvement_step(agent.policy, agent.value, agent.policy_opt, agent.value_opt,
                                                         out.samples, sigma, ppo, agent.rng);
  if (!stats.finite || !agent.policy.theta.allFinite() || !agent.value.theta.allFinite()) {
    throw NumericalError("non-finite policy improvement update for agent " + std::to_string(agent.id) +
                         " at iteration " + std::to_string(iteration_));
  }
  if (pose_mode) agent.penalty = adapt_sigma(agent.penalty, rec.mean_hinge_distance);
  rec.sigma = pose_mode ? agent.penalty.sigma : 0.0;
}

void Trainer::explore(std::vector<AgentBatch>& batches) {
  const std::size_t k = agents_.size();
  if (cfg_.mode != AgentMode::pose || k < 2) return;
  const bool first_order =
      static_cast<double>(iteration_) < cfg_.explore.first_order_fraction * static_cast<double>(cfg_.iterations);
  const ExplorePhase phase = first_order ? ExplorePhase::first_order : ExplorePhase::trust_region;

  // Frozen snapshot of every agent's reference before any agent moves.
  std::vector<CompactTrace> refs;
  refs.reserve(k);
  for (auto& a : agents_) refs.push_back(compact_trace(collect_reference_trajectory(a.policy, *a.env), cfg_.kernel));

  auto explore_one = [&](std::size_t i) {
    Agent& a = agents_[i];
    AgentBatch& b = batches[i];
    std::vector<CompactTrace> peers;
    peers.reserve(k - 1);
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) peers.push_back(refs[j]);
    }
    const DiversityGradient dg = diversity_gradient(b.batch, b.traces, peers, a.policy, cfg_.kernel);
    b.record.diversity_value = dg.mean_distance;
    ExploreRecord& er = explore_[i];
    er.iteration = iteration_;
    er.agent_id = i;
    er.phase = phase;
    if (first_order) {
      PolicyParams next = a.policy;
      next.theta = first_order_exploration(a.policy.theta, dg.gradient, cfg_.explore.div_coeff, cfg_.ppo.learning_rate);
      if (!next.theta.allFinite()) {
        throw NumericalError("non-finite exploration update for agent " + std::to_string(i) + " at iteration " +
                             std::to_string(iteration_));
      }
      er.accepted = true;
      er.kl = mean_kl(a.policy, next, b.samples.obs);
      a.policy = std::move(next);
    } else {
      const ExploreResult ex =
          exploration_step(a.policy, b.samples.obs, b.samples.actions, dg.sample_weights, dg.gradient, cfg_.explore);
      er.accepted = ex.accepted;
      er.kl = ex.kl;
      er.backtracks = ex.backtracks;
      if (ex.accepted) a.policy.theta = ex.theta;
    }
    b.record.kl_after_explore = er.accepted ? er.kl : 0.0;
  };

  if (cfg_.threads > 1) {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(k);
    for (std::size_t i = 0; i < k; ++i) {
      pool.emplace_back([&, i] {
        try {
          explore_one(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) explore_one(i);
  }
}

std::vector<IterationRecord> Trainer::iterate() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t k = agents_.size();
  std::vector<AgentBatch> batches(k);
  explore_.assign(k, ExploreRecord{});
  for (std::size_t i = 0; i < k; ++i) {
    explore_[i].iteration = iteration_;
    explore_[i].agent_id = i;
  }

  if (cfg_.threads > 1 && k > 1) {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(k);
    for (std::size_t i = 0; i < k; ++i) {
      pool.emplace_back([&, i] {
        try {
          improve(agents_[i], batches[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) improve(agents_[i], batches[i]);
  }
  explore(batches);

  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::vector<IterationRecord> rows;
  rows.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    env_steps_[i] += batches[i].steps;
    IterationRecord r = batches[i].record;
    r.wall_time_ms = cfg_.log_wall_time ? ms : 0.0;
    rows.push_back(r);
  }
  ++iteration_;
  return rows;
}

std::filesystem::path resolve_run_dir(const RunConfig& cfg) {
  std::filesystem::path root = cfg.output_dir;
  if (const char* env = std::getenv("POSE_RUN_DIR"); env != nullptr && *env != '\0') root = env;
  const std::string name =
      cfg.name.empty() ? std::string(to_string(cfg.mode)) + "_seed" + std::to_string(cfg.seed) : cfg.name;
  return root / name;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  return out;
}

std::filesystem::path write_agent_checkpoint(const std::filesystem::path& dir, const Agent& a,
                                             const std::string& suffix) {
  const auto path = dir / ("agent" + std::to_string(a.id) + suffix + ".ckpt");
  auto out = open_out(path);
  write_checkpoint(out, Checkpoint{a.policy, a.value});
  return path;
}

}  // namespace

RunArtifacts run_training(const RunConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  RunArtifacts art;
  art.run_dir = resolve_run_dir(cfg);
  std::error_code ec;
  std::filesystem::create_directories(art.run_dir, ec);
  if (ec) throw Error("cannot create run directory '" + art.run_dir.string() + "': " + ec.message());
  {
    auto out = open_out(art.run_dir / "config.cfg");
    out << format_config(cfg);
  }
  art.train_log = art.run_dir / "train_log.csv";
  art.explore_log = art.run_dir / "explore_log.csv";
  auto log = open_out(art.train_log);
  auto xlog = open_out(art.explore_log);
  log << kTrainLogHeader << '\n';
  xlog << kExploreLogHeader << '\n';
  log.flush();
  xlog.flush();
  if (cfg.iterations == 0) return art;

  Trainer trainer(cfg);
  const auto ckpt_dir = art.run_dir / "checkpoints";
  std::filesystem::create_directories(ckpt_dir, ec);
  if (ec) throw Error("cannot create checkpoint directory '" + ckpt_dir.string() + "'");

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<IterationRecord> rows;
    try {
      rows = trainer.iterate();
    } catch (const NumericalError&) {
      for (const auto& a : trainer.agents()) write_agent_checkpoint(ckpt_dir, a, "_abort");
      throw;
    }
    for (const auto& r : rows) log << format_record(r) << '\n';
    for (const auto& r : trainer.explore_records()) {
      if (r.phase != ExplorePhase::none) xlog << format_record(r) << '\n';
    }
    log.flush();
    xlog.flush();
    art.rows += rows.size();
    if (observer) observer(trainer, rows);
    if (cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0) {
      for (const auto& a : trainer.agents()) {
        art.checkpoints.push_back(write_agent_checkpoint(ckpt_dir, a, "_iter" + std::to_string(it + 1)));
      }
    }
  }

  for (const auto& a : trainer.agents()) {
    art.checkpoints.push_back(write_agent_checkpoint(ckpt_dir, a, ""));
    const auto heat = art.run_dir / ("heatmap_agent" + std::to_string(a.id) + ".csv");
    auto hout = open_out(heat);
    a.visits.write_csv(hout);
    art.heatmaps.push_back(heat);
    auto mout = open_out(art.run_dir / ("memory_agent" + std::to_string(a.id) + ".txt"));
    a.memory.save(mout);
  }
  if (cfg.eval_episodes > 0) {
    auto eout = open_out(art.run_dir / "eval.csv");
    eout << "agent_id,avg_return,success_rate\n";
    for (const auto& a : trainer.agents()) {
      Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL + a.id);
      auto env = a.env->clone();
      const EvalResult r = evaluate(a.policy, *env, cfg.eval_episodes, rng);
      art.evaluation.push_back(r);
      eout << a.id << ',' << text::format_double(r.avg_return) << ',' << text::format_double(r.success_rate) << '\n';
    }
  }
  return art;
}

}  // namespace pose
