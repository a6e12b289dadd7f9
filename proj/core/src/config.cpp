#include "pose/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pose/point_maze.hpp"
#include "pose/text_io.hpp"

namespace pose {

const char* to_string(AgentMode mode) {
  switch (mode) {
    case AgentMode::pose: return "pose";
    case AgentMode::ppo: return "ppo";
    case AgentMode::ppo_exp: return "ppo_exp";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw InvalidArgument("config key '" + std::string(key) + "': invalid value '" + std::string(value) + "' (expected " +
                        std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double x = 0.0;
  if (!text::parse_double(v, x) || !std::isfinite(x)) bad_value(key, v, "a finite number");
  return x;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int x = 0;
  if (!text::parse_int(v, x)) bad_value(key, v, "a nonnegative integer");
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::optional<double> to_optional(std::string_view key, std::string_view v) {
  if (v == "auto") return std::nullopt;
  return to_double(key, v);
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v == "none") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = std::min(v.find(',', start), v.size());
    const auto part = text::trim(v.substr(start, comma - start));
    std::size_t x = 0;
    if (!text::parse_int(part, x) || x == 0) bad_value(key, v, "comma-separated positive integers or none");
    out.push_back(x);
    start = comma + 1;
  }
  return out;
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }
std::string fmt(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(const char* key, T RunConfig::*member) {
  return {key,
          [key, member](RunConfig& c, std::string_view v) {
            if constexpr (std::is_same_v<T, double>) c.*member = to_double(key, v);
            else if constexpr (std::is_same_v<T, bool>) c.*member = to_bool(key, v);
            else if constexpr (std::is_same_v<T, std::string>) c.*member = std::string(v);
            else c.*member = to_int<T>(key, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, std::string>) return c.*member;
            else if constexpr (std::is_same_v<T, std::uint64_t> && !std::is_same_v<std::uint64_t, std::size_t>)
              return std::to_string(c.*member);
            else return fmt(c.*member);
          }};
}

// Field bound to a member of a nested struct.
template <typename S, typename T>
Field nested(const char* key, S RunConfig::*outer, T S::*member) {
  return {key,
          [key, outer, member](RunConfig& c, std::string_view v) {
            T& slot = c.*outer.*member;
            if constexpr (std::is_same_v<T, double>) slot = to_double(key, v);
            else if constexpr (std::is_same_v<T, bool>) slot = to_bool(key, v);
            else if constexpr (std::is_same_v<T, std::string>) slot = std::string(v);
            else if constexpr (std::is_same_v<T, std::optional<double>>) slot = to_optional(key, v);
            else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) slot = to_sizes(key, v);
            else slot = to_int<T>(key, v);
          },
          [outer, member](const RunConfig& c) {
            const T& slot = c.*outer.*member;
            if constexpr (std::is_same_v<T, std::string>) return slot;
            else return fmt(slot);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"run.mode",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "pose") c.mode = AgentMode::pose;
                   else if (v == "ppo") c.mode = AgentMode::ppo;
                   else if (v == "ppo_exp") c.mode = AgentMode::ppo_exp;
                   else bad_value("run.mode", v, "pose, ppo or ppo_exp");
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.mode)); }});
    f.push_back(field("run.agents", &RunConfig::agents));
    f.push_back(field("run.batch_size", &RunConfig::batch_size));
    f.push_back(field("run.iterations", &RunConfig::iterations));
    f.push_back(field("run.seed", &RunConfig::seed));
    f.push_back(field("run.threads", &RunConfig::threads));
    f.push_back(field("run.output_dir", &RunConfig::output_dir));
    f.push_back(field("run.name", &RunConfig::name));
    f.push_back(field("run.checkpoint_interval", &RunConfig::checkpoint_interval));
    f.push_back(field("run.eval_episodes", &RunConfig::eval_episodes));
    f.push_back(field("log.wall_time", &RunConfig::log_wall_time));

    f.push_back(nested("env.name", &RunConfig::env, &EnvConfig::name));
    f.push_back(nested("env.map_file", &RunConfig::env, &EnvConfig::map_file));
    f.push_back(nested("env.max_steps", &RunConfig::env, &EnvConfig::max_steps));
    f.push_back(nested("env.reward_key", &RunConfig::env, &EnvConfig::reward_key));
    f.push_back(nested("env.reward_door", &RunConfig::env, &EnvConfig::reward_door));
    f.push_back(nested("env.reward_treasure", &RunConfig::env, &EnvConfig::reward_treasure));
    f.push_back(nested("env.reward_apple", &RunConfig::env, &EnvConfig::reward_apple));
    f.push_back(nested("env.action_noise", &RunConfig::env, &EnvConfig::action_noise));

    f.push_back(nested("policy.hidden", &RunConfig::net, &NetworkConfig::policy_hidden));
    f.push_back(nested("value.hidden", &RunConfig::net, &NetworkConfig::value_hidden));
    f.push_back({"policy.activation",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "tanh") c.net.activation = Activation::tanh;
                   else if (v == "relu") c.net.activation = Activation::relu;
                   else bad_value("policy.activation", v, "tanh or relu");
                 },
                 [](const RunConfig& c) { return std::string(c.net.activation == Activation::tanh ? "tanh" : "relu"); }});
    f.push_back(nested("policy.init_log_std", &RunConfig::net, &NetworkConfig::init_log_std));

    f.push_back(nested("ppo.clip", &RunConfig::ppo, &PPOConfig::clip));
    f.push_back(nested("ppo.gamma", &RunConfig::ppo, &PPOConfig::gamma));
    f.push_back(nested("ppo.gae_lambda", &RunConfig::ppo, &PPOConfig::gae_lambda));
    f.push_back(nested("ppo.epochs", &RunConfig::ppo, &PPOConfig::epochs));
    f.push_back(nested("ppo.minibatch_size", &RunConfig::ppo, &PPOConfig::minibatch_size));
    f.push_back(nested("ppo.lr", &RunConfig::ppo, &PPOConfig::learning_rate));
    f.push_back(nested("ppo.value_coef", &RunConfig::ppo, &PPOConfig::value_coef));
    f.push_back(nested("ppo.entropy_coef", &RunConfig::ppo, &PPOConfig::entropy_coef));
    f.push_back(nested("ppo.entropy_final", &RunConfig::ppo, &PPOConfig::entropy_final));
    f.push_back(nested("ppo.max_grad_norm", &RunConfig::ppo, &PPOConfig::max_grad_norm));

    f.push_back(nested("penalty.sigma", &RunConfig::penalty, &PenaltyState::sigma));
    f.push_back(nested("penalty.eta", &RunConfig::penalty, &PenaltyState::eta));
    f.push_back(nested("penalty.sigma_min", &RunConfig::penalty, &PenaltyState::sigma_min));
    f.push_back(nested("penalty.sigma_max", &RunConfig::penalty, &PenaltyState::sigma_max));
    f.push_back(nested("penalty.tolerance", &RunConfig::penalty, &PenaltyState::tolerance));
    f.push_back(nested("penalty.baseline", &RunConfig::penalty, &PenaltyState::baseline));

    f.push_back(nested("explore.delta_kl", &RunConfig::explore, &ExploreConfig::delta_kl));
    f.push_back(nested("explore.cg_iters", &RunConfig::explore, &ExploreConfig::cg_iters));
    f.push_back(nested("explore.cg_damping", &RunConfig::explore, &ExploreConfig::cg_damping));
    f.push_back(nested("explore.backtrack_steps", &RunConfig::explore, &ExploreConfig::backtrack_steps));
    f.push_back(nested("explore.backtrack_ratio", &RunConfig::explore, &ExploreConfig::backtrack_ratio));
    f.push_back(nested("explore.first_order_fraction", &RunConfig::explore, &ExploreConfig::first_order_fraction));
    f.push_back(nested("explore.div_coeff", &RunConfig::explore, &ExploreConfig::div_coeff));

    f.push_back({"kernel.bandwidth",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "median") c.kernel.bandwidth_mode = BandwidthMode::median_heuristic;
                   else if (v == "fixed") c.kernel.bandwidth_mode = BandwidthMode::fixed;
                   else bad_value("kernel.bandwidth", v, "median or fixed");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.kernel.bandwidth_mode == BandwidthMode::fixed ? "fixed" : "median");
                 }});
    f.push_back(nested("kernel.fixed_bandwidth", &RunConfig::kernel, &KernelConfig::fixed_bandwidth));
    f.push_back(nested("kernel.max_points", &RunConfig::kernel, &KernelConfig::max_points));

    f.push_back(nested("memory.capacity", &RunConfig::memory, &MemoryConfig::capacity));
    f.push_back(nested("memory.radius", &RunConfig::memory, &MemoryConfig::radius));
    f.push_back(nested("memory.reseed", &RunConfig::memory, &MemoryConfig::reseed));
    f.push_back(nested("memory.use_goal", &RunConfig::memory, &MemoryConfig::use_goal));
    f.push_back(nested("memory.min_return", &RunConfig::memory, &MemoryConfig::min_return));

    f.push_back(field("bonus.lambda", &RunConfig::bonus_lambda));
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  if (agents == 0) throw InvalidArgument("run.agents must be at least 1");
  if (batch_size == 0) throw InvalidArgument("run.batch_size must be at least 1");
  if (threads == 0) throw InvalidArgument("run.threads must be at least 1");
  if (output_dir.empty()) throw InvalidArgument("run.output_dir must not be empty");
  if (!(memory.radius > 0.0)) throw InvalidArgument("memory.radius must be positive");
  if (!(bonus_lambda >= 0.0)) throw InvalidArgument("bonus.lambda must be nonnegative");
  if (!(env.action_noise >= 0.0)) throw InvalidArgument("env.action_noise must be nonnegative");
  ppo.validate();
  penalty.validate();
  explore.validate();
  kernel.validate();
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  f->set(cfg, value);
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set_config_value(cfg, text::trim(assignment.substr(0, eq)), text::trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, 1);
    const auto key = text::trim(body.substr(0, eq));
    const auto value = text::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", line_no, 1);
    if (!seen.insert(std::string(key)).second) {
      throw ParseError("duplicate key '" + std::string(key) + "'", line_no, 1);
    }
    try {
      set_config_value(cfg, key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no, 1);
    }
  }
  return cfg;
}

RunConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  std::string_view section;
  for (const auto& f : fields()) {
    const std::string_view key = f.key;
    const auto sec = key.substr(0, key.find('.'));
    if (!out.empty() && sec != section) out += '\n';
    section = sec;
    out += key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  const auto names = point_maze_preset_names();
  if (cfg.map_file.empty() && std::find(names.begin(), names.end(), cfg.name) != names.end()) {
    PointMazeLayout layout = point_maze_preset(cfg.name);
    if (cfg.max_steps > 0) layout.max_steps = cfg.max_steps;
    layout.action_noise = cfg.action_noise;
    return std::make_unique<PointMaze>(layout);
  }
  std::string map;
  GridRewards rewards;
  if (!cfg.map_file.empty()) {
    std::ifstream in(cfg.map_file);
    if (!in) throw Error("cannot open map file '" + cfg.map_file + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    map = ss.str();
  } else {
    map = bundled_map(cfg.name);
    rewards = bundled_rewards(cfg.name);
  }
  if (cfg.reward_key) rewards.key = *cfg.reward_key;
  if (cfg.reward_door) rewards.door = *cfg.reward_door;
  if (cfg.reward_treasure) rewards.treasure = *cfg.reward_treasure;
  if (cfg.reward_apple) rewards.apple = *cfg.reward_apple;
  return std::make_unique<GridMaze>(load_maze(map, rewards, cfg.max_steps > 0 ? cfg.max_steps : 300));
}

}  // namespace pose
