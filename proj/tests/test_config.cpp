#include <doctest.h>

#include <sstream>

#include "pose/config.hpp"

using namespace pose;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return static_cast<int>(e.line());
  }
  return -1;
}

}  // namespace

TEST_CASE("defaults round trip through the printed form") {
  const RunConfig def;
  const std::string text = format_config(def);
  const RunConfig back = parse_config_text(text);
  CHECK(format_config(back) == text);
  for (const auto& key : config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("values and comments") {
  const RunConfig c = parse_config_text(
      "# team\n"
      "run.mode = ppo_exp\n"
      "run.agents=2\n"
      "  policy.hidden = 16, 8  \n"
      "\n"
      "kernel.bandwidth = fixed\n"
      "kernel.fixed_bandwidth = 0.25\n"
      "memory.reseed = false\n"
      "penalty.baseline = true\n"
      "ppo.entropy_final = 0.001\n"
      "env.reward_apple = 3\n");
  CHECK(c.mode == AgentMode::ppo_exp);
  CHECK(c.agents == 2);
  CHECK(c.net.policy_hidden == std::vector<std::size_t>{16, 8});
  CHECK(c.kernel.bandwidth_mode == BandwidthMode::fixed);
  CHECK(c.kernel.fixed_bandwidth == 0.25);
  CHECK_FALSE(c.memory.reseed);
  CHECK(c.penalty.baseline);
  CHECK(c.ppo.entropy_final == std::optional<double>(0.001));
  CHECK(c.env.reward_apple == std::optional<double>(3.0));
  CHECK_FALSE(c.env.reward_key.has_value());
  const RunConfig again = parse_config_text(format_config(c));
  CHECK(format_config(again) == format_config(c));
}

TEST_CASE("errors name the offending line") {
  CHECK(error_line("run.agents = 2\nrun.bogus = 1\n") == 2);
  CHECK(error_line("run.agents = 2\n\nrun.agents = 3\n") == 3);
  CHECK(error_line("ppo.clip = wide\n") == 1);
  CHECK(error_line("# ok\nno equals sign\n") == 2);
  CHECK(error_line("run.mode = sac\n") == 1);
  CHECK(error_line("run.agents = -1\n") == 1);
  CHECK(error_line("ppo.clip = 0.2\n") == -1);
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_override(c, "ppo.clip=0.1");
  CHECK(c.ppo.clip == 0.1);
  apply_override(c, "run.name = smoke");
  CHECK(c.name == "smoke");
  CHECK_THROWS_AS(apply_override(c, "ppo.clip"), InvalidArgument);
  CHECK_THROWS_AS(apply_override(c, "nope.key=1"), InvalidArgument);
  CHECK_THROWS_AS(set_config_value(c, "run.iterations", "many"), InvalidArgument);
}

TEST_CASE("validation rejects inconsistent settings") {
  RunConfig c;
  c.ppo.clip = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.penalty.sigma_min = 5;
  c.penalty.sigma_max = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.explore.backtrack_ratio = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_config_text("run.agents = 0\n").validate(), InvalidArgument);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("environment construction") {
  EnvConfig e;
  e.name = "kdt21";
  auto grid = make_environment(e);
  CHECK(grid->observation_dim() == 3);
  e.name = "point-u";
  e.max_steps = 17;
  auto point = make_environment(e);
  CHECK(point->observation_dim() == 2);
  CHECK(point->max_steps() == 17);
  e.name = "nowhere";
  CHECK_THROWS(make_environment(e));
  e.name = "deceptive15";
  e.map_file = "/nonexistent/map.txt";
  CHECK_THROWS(make_environment(e));
}
