#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pose/trainer.hpp"

using namespace pose;
namespace fs = std::filesystem;

namespace {

RunConfig smoke(const std::string& name) {
  RunConfig c;
  c.env.name = "tiny";
  c.env.max_steps = 30;
  c.agents = 2;
  c.batch_size = 3;
  c.iterations = 10;
  c.net.policy_hidden = {8};
  c.net.value_hidden = {8};
  c.ppo.epochs = 2;
  c.ppo.minibatch_size = 0;
  c.explore.first_order_fraction = 0.3;
  c.eval_episodes = 5;
  c.log_wall_time = false;
  c.output_dir = (fs::temp_directory_path() / "pose_trainer_tests").string();
  c.name = name;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// A policy that always takes action `a` on a 4-way grid, from output biases alone.
PolicyParams always(std::size_t input, int a) {
  PolicyParams p{make_architecture(input, {2}, 4, HeadKind::categorical), Vec()};
  p.theta = Vec::Zero(static_cast<Eigen::Index>(p.arch.param_count()));
  p.theta(p.theta.size() - 4 + a) = 50.0;
  return p;
}

}  // namespace

TEST_CASE("rollouts carry every per-step field and respect the step limit") {
  EnvConfig e;
  e.name = "deceptive15";
  e.max_steps = 25;
  auto env = make_environment(e);
  Rng rng(3);
  const PolicyParams p = init_policy(make_architecture(2, {4}, 4, HeadKind::categorical), rng);
  const ValueParams v = init_value(make_architecture(2, {4}, 1, HeadKind::scalar), rng);
  VisitationCounter visits(env->visit_grid());
  Rng r1(9), r2(9);
  const Batch a = collect_rollouts(p, &v, *env, 4, r1, &visits, 0.1);
  const Batch b = collect_rollouts(p, &v, *env, 4, r2);
  REQUIRE(a.size() == 4);
  std::size_t steps = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a[k].size() <= 25);
    CHECK(a[k].size() == b[k].size());
    steps += a[k].size();
    double ret = 0;
    for (std::size_t t = 0; t < a[k].size(); ++t) {
      const Step& s = a[k].steps[t];
      CHECK(s.log_prob == doctest::Approx(log_prob(policy_forward(p, s.observation), s.action)));
      CHECK(s.value == doctest::Approx(value_forward(v, s.observation)));
      CHECK(s.position.size() == 2);
      CHECK(s.bonus > 0.0);
      CHECK(b[k].steps[t].bonus == 0.0);
      CHECK(s.action.index == b[k].steps[t].action.index);
      ret += s.reward;
    }
    CHECK(a[k].episode_return == doctest::Approx(ret));
    if (a[k].truncated) CHECK(a[k].size() == 25);
  }
  CHECK(visits.total() == steps);
}

TEST_CASE("evaluate counts episodes ending at the optimal goal") {
  EnvConfig tiny;
  tiny.name = "tiny";
  auto env = make_environment(tiny);
  Rng rng(1);
  const EvalResult ev = evaluate(always(env->observation_dim(), 0), *env, 10, rng);
  CHECK(ev.success_rate == 1.0);
  CHECK(ev.avg_return == 1.0);

  // Walking into the west wall forever times out with nothing.
  EnvConfig e;
  e.max_steps = 20;
  auto dm = make_environment(e);
  const EvalResult stuck = evaluate(always(2, 2), *dm, 5, rng);
  CHECK(stuck.avg_return == 0.0);
  CHECK(stuck.success_rate == 0.0);
}

TEST_CASE("reference trajectories are deterministic") {
  auto env = make_environment(EnvConfig{});
  Rng rng(4);
  const PolicyParams p = init_policy(make_architecture(2, {4}, 4, HeadKind::categorical), rng);
  const Trajectory a = collect_reference_trajectory(p, *env);
  const Trajectory b = collect_reference_trajectory(p, *env);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a.steps[t].position == b.steps[t].position);
    CHECK(a.steps[t].action.index == greedy_action(policy_forward(p, a.steps[t].observation)).index);
  }
}

TEST_CASE("zero iterations leave only the config snapshot and headers") {
  RunConfig c = smoke("zero");
  c.iterations = 0;
  fs::remove_all(resolve_run_dir(c));
  const RunArtifacts art = run_training(c);
  CHECK(slurp(art.train_log) == std::string(kTrainLogHeader) + "\n");
  CHECK(fs::exists(art.run_dir / "config.cfg"));
  CHECK(format_config(load_config(art.run_dir / "config.cfg")) == format_config(c));
}

TEST_CASE("smoke run artifacts") {
  const RunConfig c = smoke("smoke");
  fs::remove_all(resolve_run_dir(c));
  const RunArtifacts art = run_training(c);
  const std::string log = slurp(art.train_log);
  CHECK(lines(log) == 1 + c.iterations * c.agents);
  CHECK(art.rows == c.iterations * c.agents);
  REQUIRE(art.checkpoints.size() == c.agents);
  for (const auto& ck : art.checkpoints) {
    std::ifstream in(ck);
    const Checkpoint cp = read_checkpoint(in);
    CHECK(cp.policy.arch.layers == std::vector<std::size_t>{2, 8, 4});
    CHECK(cp.value.has_value());
  }
  REQUIRE(art.heatmaps.size() == c.agents);
  std::ifstream hm(art.heatmaps[0]);
  CHECK(VisitationCounter::read_csv(hm).total() > 0);
  CHECK(art.evaluation.size() == c.agents);
  const std::string xlog = slurp(art.explore_log);
  // Every exploring iteration logs one row per agent.
  CHECK(lines(xlog) == 1 + c.iterations * c.agents);
}

TEST_CASE("single-threaded runs are reproducible") {
  RunConfig c = smoke("repro_a");
  const std::string a = slurp(run_training(c).train_log);
  c.name = "repro_b";
  const std::string b = slurp(run_training(c).train_log);
  CHECK(a == b);
}

TEST_CASE("visitation totals equal training steps") {
  Trainer t(smoke("visits"));
  for (int i = 0; i < 4; ++i) t.iterate();
  for (std::size_t i = 0; i < t.agents().size(); ++i) CHECK(t.agents()[i].visits.total() == t.env_steps()[i]);
}

TEST_CASE("pose with one agent and no memory matches ppo") {
  RunConfig c = smoke("ablation");
  c.agents = 1;
  c.memory.capacity = 0;
  RunConfig p = c;
  p.mode = AgentMode::ppo;
  Trainer a(c), b(p);
  for (int i = 0; i < 6; ++i) {
    a.iterate();
    b.iterate();
    CHECK(a.agents()[0].policy.theta == b.agents()[0].policy.theta);
    CHECK(a.agents()[0].value.theta == b.agents()[0].value.theta);
  }
}

TEST_CASE("memories satisfy their invariants after training") {
  RunConfig c = smoke("memory");
  c.env.name = "deceptive15";
  c.memory.min_return = -1.0;
  Trainer t(c);
  for (int i = 0; i < 6; ++i) t.iterate();
  for (const auto& ag : t.agents()) {
    const GuidanceMemory& m = ag.memory;
    CHECK(m.size() <= m.capacity());
    for (std::size_t k = 0; k < m.size(); ++k) {
      CHECK(is_similar(m.entries()[k].embedding, *m.anchor(), m.similarity_radius()));
      if (k > 0) CHECK_FALSE(m.key_of(m.entries()[k - 1]) < m.key_of(m.entries()[k]));
    }
  }
}
