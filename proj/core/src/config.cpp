#include "umdqn/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "umdqn/errors.hpp"

namespace umdqn {

const char* algo_name(Algo algo) {
  switch (algo) {
    case Algo::UmdqnKl:
      return "umdqn-kl";
    case Algo::UmdqnC:
      return "umdqn-c";
    case Algo::UmdqnW:
      return "umdqn-w";
  }
  return "?";
}

Algo parse_algo(const std::string& name) {
  if (name == "umdqn-kl") return Algo::UmdqnKl;
  if (name == "umdqn-c") return Algo::UmdqnC;
  if (name == "umdqn-w") return Algo::UmdqnW;
  throw ValidationError("unknown algorithm \"" + name +
                        "\" (expected umdqn-kl, umdqn-c or umdqn-w)");
}

Representation algo_representation(Algo algo) {
  switch (algo) {
    case Algo::UmdqnKl:
      return Representation::Pdf;
    case Algo::UmdqnC:
      return Representation::Cdf;
    case Algo::UmdqnW:
      return Representation::Qf;
  }
  return Representation::Cdf;
}

GridWorldConfig TrainConfig::grid_config() const {
  GridWorldConfig g;
  g.target = {grid_target_x, grid_target_y};
  g.trap = {grid_trap_x, grid_trap_y};
  g.reward_sigma = grid_reward_sigma;
  g.double_move_prob = grid_double_move_prob;
  g.step_cap = grid_step_cap;
  return g;
}

Latent TrainConfig::latent_kind() const {
  if (latent == "logistic") return Latent::Logistic;
  if (latent == "normal") return Latent::Normal;
  throw ValidationError("latent must be \"logistic\" or \"normal\"");
}

void TrainConfig::validate() const {
  const auto check = [](bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError("config field " + field + ": " + what);
  };
  check(env_name == "gridworld" || env_name == "cartpole", "env", "unknown environment");
  check(total_steps >= 1, "total_steps", "must be >= 1");
  check(embed_width >= 1, "embed_width", "must be >= 1");
  check(hidden_width >= 1, "hidden_width", "must be >= 1");
  check(n_cc >= 2, "n_cc", "must be >= 2");
  check(gamma >= 0.0 && gamma < 1.0, "gamma", "must be in [0, 1)");
  check(lr > 0.0, "lr", "must be > 0");
  check(adam_eps > 0.0, "adam_eps", "must be > 0");
  check(grad_clip > 0.0, "grad_clip", "must be > 0");
  check(main_update_every >= 1, "main_update_every", "must be >= 1");
  check(target_update_every >= 1, "target_update_every", "must be >= 1");
  check(memory_capacity >= 1, "memory_capacity", "must be >= 1");
  check(batch_size >= 1 && batch_size <= memory_capacity, "batch_size",
        "must be in [1, memory_capacity]");
  check(eps_start >= 0.0 && eps_start <= 1.0, "eps_start", "must be in [0, 1]");
  check(eps_end >= 0.0 && eps_end <= 1.0, "eps_end", "must be in [0, 1]");
  check(eps_decay > 0.0, "eps_decay", "must be > 0");
  check(eps_test >= 0.0 && eps_test <= 1.0, "eps_test", "must be in [0, 1]");
  if (representation() != Representation::Qf) {
    check(std::isfinite(z_min), "z_min", "must be finite for a PDF/CDF run");
    check(std::isfinite(z_max), "z_max", "must be finite for a PDF/CDF run");
    check(z_min < z_max, "z_min", "must be < z_max");
    check(gamma > 0.0, "gamma", "must be > 0 for a PDF/CDF run");
  }
  check(n_z >= 2, "n_z", "must be >= 2");
  check(n_tau >= 2, "n_tau", "must be >= 2");
  check(kappa > 0.0, "kappa", "must be > 0");
  check(simpson_points >= 3 && simpson_points % 2 == 1, "simpson_points", "must be odd and >= 3");
  check(n_mc >= 1, "n_mc", "must be >= 1");
  check(eval_every_episodes >= 1, "eval_every_episodes", "must be >= 1");
  check(eval_episodes >= 0, "eval_episodes", "must be >= 0");
  check(checkpoint_every >= 1, "checkpoint_every", "must be >= 1");
  check(log_smooth_window >= 1, "log_smooth_window", "must be >= 1");
  latent_kind();
  if (env_name == "gridworld") grid_config().validate();
}

TrainConfig default_config(const std::string& env_name) {
  TrainConfig cfg;
  cfg.env_name = env_name;
  if (env_name == "gridworld") {
    cfg.gamma = 0.5;
    cfg.z_min = -2.0;
    cfg.z_max = 2.0;
  } else if (env_name == "cartpole") {
    cfg.gamma = 0.99;
    cfg.z_min = -10.0;
    cfg.z_max = 110.0;
  } else {
    throw ValidationError("default_config: unknown environment \"" + env_name + "\"");
  }
  return cfg;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (in.fail() || !in.eof()) {
    throw ValidationError("config field " + key + ": cannot parse \"" + value + "\"");
  }
  return out;
}

}  // namespace

void apply_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(TrainConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"algo", [](TrainConfig& c, const std::string& v) { c.algo = parse_algo(v); }},
      {"env", [](TrainConfig& c, const std::string& v) { c.env_name = v; }},
      {"seed",
       [](TrainConfig& c, const std::string& v) {
         c.seed = parse_number<std::uint64_t>("seed", v);
       }},
      {"total_steps",
       [](TrainConfig& c, const std::string& v) {
         c.total_steps = parse_number<std::int64_t>("total_steps", v);
       }},
      {"out_dir", [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
      {"embed_width",
       [](TrainConfig& c, const std::string& v) {
         c.embed_width = parse_number<int>("embed_width", v);
       }},
      {"hidden_width",
       [](TrainConfig& c, const std::string& v) {
         c.hidden_width = parse_number<int>("hidden_width", v);
       }},
      {"n_cc", [](TrainConfig& c, const std::string& v) { c.n_cc = parse_number<int>("n_cc", v); }},
      {"latent", [](TrainConfig& c, const std::string& v) { c.latent = v; }},
      {"gamma",
       [](TrainConfig& c, const std::string& v) { c.gamma = parse_number<double>("gamma", v); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = parse_number<double>("lr", v); }},
      {"adam_eps",
       [](TrainConfig& c, const std::string& v) {
         c.adam_eps = parse_number<double>("adam_eps", v);
       }},
      {"grad_clip",
       [](TrainConfig& c, const std::string& v) {
         c.grad_clip = parse_number<double>("grad_clip", v);
       }},
      {"main_update_every",
       [](TrainConfig& c, const std::string& v) {
         c.main_update_every = parse_number<int>("main_update_every", v);
       }},
      {"target_update_every",
       [](TrainConfig& c, const std::string& v) {
         c.target_update_every = parse_number<int>("target_update_every", v);
       }},
      {"memory_capacity",
       [](TrainConfig& c, const std::string& v) {
         c.memory_capacity = parse_number<int>("memory_capacity", v);
       }},
      {"batch_size",
       [](TrainConfig& c, const std::string& v) {
         c.batch_size = parse_number<int>("batch_size", v);
       }},
      {"eps_start",
       [](TrainConfig& c, const std::string& v) {
         c.eps_start = parse_number<double>("eps_start", v);
       }},
      {"eps_end",
       [](TrainConfig& c, const std::string& v) {
         c.eps_end = parse_number<double>("eps_end", v);
       }},
      {"eps_decay",
       [](TrainConfig& c, const std::string& v) {
         c.eps_decay = parse_number<double>("eps_decay", v);
       }},
      {"eps_test",
       [](TrainConfig& c, const std::string& v) {
         c.eps_test = parse_number<double>("eps_test", v);
       }},
      {"n_z", [](TrainConfig& c, const std::string& v) { c.n_z = parse_number<int>("n_z", v); }},
      {"n_tau",
       [](TrainConfig& c, const std::string& v) { c.n_tau = parse_number<int>("n_tau", v); }},
      {"z_min",
       [](TrainConfig& c, const std::string& v) { c.z_min = parse_number<double>("z_min", v); }},
      {"z_max",
       [](TrainConfig& c, const std::string& v) { c.z_max = parse_number<double>("z_max", v); }},
      {"kappa",
       [](TrainConfig& c, const std::string& v) { c.kappa = parse_number<double>("kappa", v); }},
      {"simpson_points",
       [](TrainConfig& c, const std::string& v) {
         c.simpson_points = parse_number<int>("simpson_points", v);
       }},
      {"n_mc", [](TrainConfig& c, const std::string& v) { c.n_mc = parse_number<int>("n_mc", v); }},
      {"eval_every_episodes",
       [](TrainConfig& c, const std::string& v) {
         c.eval_every_episodes = parse_number<int>("eval_every_episodes", v);
       }},
      {"eval_episodes",
       [](TrainConfig& c, const std::string& v) {
         c.eval_episodes = parse_number<int>("eval_episodes", v);
       }},
      {"checkpoint_every",
       [](TrainConfig& c, const std::string& v) {
         c.checkpoint_every = parse_number<std::int64_t>("checkpoint_every", v);
       }},
      {"log_smooth_window",
       [](TrainConfig& c, const std::string& v) {
         c.log_smooth_window = parse_number<int>("log_smooth_window", v);
       }},
      {"grid_target_x",
       [](TrainConfig& c, const std::string& v) {
         c.grid_target_x = parse_number<int>("grid_target_x", v);
       }},
      {"grid_target_y",
       [](TrainConfig& c, const std::string& v) {
         c.grid_target_y = parse_number<int>("grid_target_y", v);
       }},
      {"grid_trap_x",
       [](TrainConfig& c, const std::string& v) {
         c.grid_trap_x = parse_number<int>("grid_trap_x", v);
       }},
      {"grid_trap_y",
       [](TrainConfig& c, const std::string& v) {
         c.grid_trap_y = parse_number<int>("grid_trap_y", v);
       }},
      {"grid_reward_sigma",
       [](TrainConfig& c, const std::string& v) {
         c.grid_reward_sigma = parse_number<double>("grid_reward_sigma", v);
       }},
      {"grid_double_move_prob",
       [](TrainConfig& c, const std::string& v) {
         c.grid_double_move_prob = parse_number<double>("grid_double_move_prob", v);
       }},
      {"grid_step_cap",
       [](TrainConfig& c, const std::string& v) {
         c.grid_step_cap = parse_number<int>("grid_step_cap", v);
       }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ValidationError("unknown config key \"" + key + "\"");
  it->second(cfg, value);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file \"" + path + "\"");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config file " + path + " line " + std::to_string(line_no) +
                            ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

TrainConfig assemble_config(const std::map<std::string, std::string>& file_kv,
                            const std::map<std::string, std::string>& override_kv) {
  std::string env_name = "gridworld";
  if (const auto it = file_kv.find("env"); it != file_kv.end()) env_name = it->second;
  if (const auto it = override_kv.find("env"); it != override_kv.end()) env_name = it->second;
  TrainConfig cfg = default_config(env_name);
  for (const auto& [k, v] : file_kv) apply_kv(cfg, k, v);
  for (const auto& [k, v] : override_kv) apply_kv(cfg, k, v);
  cfg.validate();
  return cfg;
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::map<std::string, std::string> config_kv(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["algo"] = algo_name(cfg.algo);
  kv["env"] = cfg.env_name;
  kv["seed"] = std::to_string(cfg.seed);
  kv["total_steps"] = std::to_string(cfg.total_steps);
  kv["out_dir"] = cfg.out_dir;
  kv["embed_width"] = std::to_string(cfg.embed_width);
  kv["hidden_width"] = std::to_string(cfg.hidden_width);
  kv["n_cc"] = std::to_string(cfg.n_cc);
  kv["latent"] = cfg.latent;
  kv["gamma"] = format_double(cfg.gamma);
  kv["lr"] = format_double(cfg.lr);
  kv["adam_eps"] = format_double(cfg.adam_eps);
  kv["grad_clip"] = format_double(cfg.grad_clip);
  kv["main_update_every"] = std::to_string(cfg.main_update_every);
  kv["target_update_every"] = std::to_string(cfg.target_update_every);
  kv["memory_capacity"] = std::to_string(cfg.memory_capacity);
  kv["batch_size"] = std::to_string(cfg.batch_size);
  kv["eps_start"] = format_double(cfg.eps_start);
  kv["eps_end"] = format_double(cfg.eps_end);
  kv["eps_decay"] = format_double(cfg.eps_decay);
  kv["eps_test"] = format_double(cfg.eps_test);
  kv["n_z"] = std::to_string(cfg.n_z);
  kv["n_tau"] = std::to_string(cfg.n_tau);
  kv["z_min"] = format_double(cfg.z_min);
  kv["z_max"] = format_double(cfg.z_max);
  kv["kappa"] = format_double(cfg.kappa);
  kv["simpson_points"] = std::to_string(cfg.simpson_points);
  kv["n_mc"] = std::to_string(cfg.n_mc);
  kv["eval_every_episodes"] = std::to_string(cfg.eval_every_episodes);
  kv["eval_episodes"] = std::to_string(cfg.eval_episodes);
  kv["checkpoint_every"] = std::to_string(cfg.checkpoint_every);
  kv["log_smooth_window"] = std::to_string(cfg.log_smooth_window);
  kv["grid_target_x"] = std::to_string(cfg.grid_target_x);
  kv["grid_target_y"] = std::to_string(cfg.grid_target_y);
  kv["grid_trap_x"] = std::to_string(cfg.grid_trap_x);
  kv["grid_trap_y"] = std::to_string(cfg.grid_trap_y);
  kv["grid_reward_sigma"] = format_double(cfg.grid_reward_sigma);
  kv["grid_double_move_prob"] = format_double(cfg.grid_double_move_prob);
  kv["grid_step_cap"] = std::to_string(cfg.grid_step_cap);
  return kv;
}

std::string config_hash(const TrainConfig& cfg) {
  std::string text;
  for (const auto& [k, v] : config_kv(cfg)) {
    text += k;
    text += '=';
    text += v;
    text += '\n';
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace umdqn
