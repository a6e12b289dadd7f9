// pose: train, evaluate, export heatmaps and inspect configs.
//
// Exit codes: 0 success, 1 runtime or config error, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pose/config.hpp"
#include "pose/text_io.hpp"
#include "pose/trainer.hpp"

namespace {

pose::RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  pose::RunConfig cfg = path.empty() ? pose::RunConfig{} : pose::load_config(path);
  for (const auto& o : overrides) pose::apply_override(cfg, o);
  return cfg;
}

int cmd_train(const std::string& config, const std::vector<std::string>& overrides, bool quiet) {
  const pose::RunConfig cfg = build_config(config, overrides);
  cfg.validate();
  pose::IterationObserver progress;
  if (!quiet) {
    progress = [](const pose::Trainer& t, const std::vector<pose::IterationRecord>& rows) {
      double ret = 0.0;
      double succ = 0.0;
      for (const auto& r : rows) {
        ret += r.avg_return;
        succ += r.success_rate;
      }
      const double k = static_cast<double>(rows.size());
      std::cerr << "iter " << t.iteration() << "/" << t.config().iterations << "  return " << ret / k << "  success "
                << succ / k << '\n';
    };
  }
  const pose::RunArtifacts art = pose::run_training(cfg, progress);
  for (std::size_t i = 0; i < art.evaluation.size(); ++i) {
    std::cerr << "eval agent " << i << ": return " << art.evaluation[i].avg_return << " success "
              << art.evaluation[i].success_rate << '\n';
  }
  std::cout << art.run_dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& config, const std::vector<std::string>& overrides,
                 std::size_t episodes, std::uint64_t seed) {
  std::ifstream in(checkpoint);
  if (!in) throw pose::Error("cannot open checkpoint '" + checkpoint + "'");
  const pose::Checkpoint ckpt = pose::read_checkpoint(in);
  const pose::RunConfig cfg = build_config(config, overrides);
  auto env = pose::make_environment(cfg.env);
  if (env->observation_dim() != ckpt.policy.arch.input_dim()) {
    throw pose::Error("checkpoint input size does not match the environment observation size");
  }
  pose::Rng rng(seed);
  const pose::EvalResult r = pose::evaluate(ckpt.policy, *env, episodes, rng);
  std::cout << "episodes " << episodes << '\n'
            << "avg_return " << pose::text::format_double(r.avg_return) << '\n'
            << "success_rate " << pose::text::format_double(r.success_rate) << '\n';
  return 0;
}

int cmd_heatmap(const std::string& run_dir, std::size_t agent, const std::string& output) {
  const auto src = std::filesystem::path(run_dir) / ("heatmap_agent" + std::to_string(agent) + ".csv");
  std::ifstream in(src);
  if (!in) throw pose::Error("no heatmap for agent " + std::to_string(agent) + " in '" + run_dir + "'");
  const pose::VisitationCounter counts = pose::VisitationCounter::read_csv(in);
  if (output.empty() || output == "-") {
    counts.write_csv(std::cout);
    return 0;
  }
  std::ofstream out(output);
  if (!out) throw pose::Error("cannot write '" + output + "'");
  counts.write_csv(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POSE reinforcement learning laboratory"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a team of agents");
  train->add_option("-c,--config", config, "Config file")->required();
  train->add_option("--set", overrides, "Override a key, e.g. ppo.clip=0.1")->allow_extra_args(false);
  train->add_flag("-q,--quiet", quiet, "No per-iteration progress");

  std::string checkpoint;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a policy checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("-c,--config", config, "Config file naming the environment");
  std::string env_name;
  eval->add_option("--env", env_name, "Environment name (bundled map or point preset)");
  eval->add_option("--set", overrides, "Override a key")->allow_extra_args(false);
  eval->add_option("-n,--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Random seed");

  std::string run_dir;
  std::size_t agent = 0;
  std::string output;
  auto* heat = app.add_subcommand("heatmap", "Export an agent's visitation counts");
  heat->add_option("--run-dir", run_dir, "Run directory")->required();
  heat->add_option("--agent", agent, "Agent id");
  heat->add_option("-o,--output", output, "Output CSV (default stdout)");

  auto* print = app.add_subcommand("print-config", "Print every config key with its value");
  print->add_option("-c,--config", config, "Config file (defaults when omitted)");
  print->add_option("--set", overrides, "Override a key")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(config, overrides, quiet);
    if (*eval && !env_name.empty()) overrides.push_back("env.name=" + env_name);
    if (*eval) return cmd_evaluate(checkpoint, config, overrides, episodes, seed);
    if (*heat) return cmd_heatmap(run_dir, agent, output);
    if (*print) {
      std::cout << pose::format_config(build_config(config, overrides));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
