// Experiment front end: training runs, checkpoint evaluation, distribution
// dumps, oracle comparisons and contraction probes.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "umdqn/agent.hpp"
#include "umdqn/checkpoint.hpp"
#include "umdqn/config.hpp"
#include "umdqn/errors.hpp"
#include "umdqn/oracle.hpp"

namespace {

using namespace umdqn;
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--set expects key=value, got \"" + s + "\"");
    }
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

void write_manifest(const TrainConfig& cfg) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["config"] = config_kv(cfg);
  doc["config_hash"] = config_hash(cfg);
  std::ofstream out(fs::path(cfg.out_dir) / "run_manifest.json");
  if (!out) throw ValidationError("cannot write manifest under \"" + cfg.out_dir + "\"");
  out << doc.dump(2) << "\n";
}

void write_learning_curve(const std::string& path, std::span<const TrainLogRow> rows,
                          int window) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write \"" + path + "\"");
  out << "episode,env_steps,eval_return_mean,eval_return_smoothed\n";
  std::vector<double> evals;
  for (const TrainLogRow& row : rows) {
    if (!row.has_eval) continue;
    evals.push_back(row.eval_return_mean);
    const int lo = std::max(0, static_cast<int>(evals.size()) - window);
    double acc = 0.0;
    for (std::size_t i = lo; i < evals.size(); ++i) acc += evals[i];
    const double smooth = acc / static_cast<double>(evals.size() - lo);
    out << row.episode << ',' << row.env_steps << ',' << fmt(row.eval_return_mean) << ','
        << fmt(smooth) << '\n';
  }
}

int cmd_train(const std::string& config_file, const std::map<std::string, std::string>& overrides) {
  const auto file_kv =
      config_file.empty() ? std::map<std::string, std::string>{} : parse_config_file(config_file);
  const TrainConfig cfg = assemble_config(file_kv, overrides);

  fs::create_directories(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  write_manifest(cfg);

  std::unique_ptr<Env> env = make_env(cfg.env_name, cfg.grid_config());
  Agent agent(cfg, *env);

  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Agent& a, std::int64_t step) {
    auto meta = config_kv(a.cfg());
    meta["step"] = std::to_string(step);
    char name[64];
    std::snprintf(name, sizeof(name), "step_%09lld.json", static_cast<long long>(step));
    save_checkpoint((fs::path(cfg.out_dir) / "checkpoints" / name).string(), a.model(), meta);
  };

  const std::vector<TrainLogRow> rows = run_training(agent, *env, hooks);

  write_training_log((fs::path(cfg.out_dir) / "training_log.csv").string(), rows);
  write_learning_curve((fs::path(cfg.out_dir) / "learning_curve.csv").string(), rows,
                       cfg.log_smooth_window);
  auto meta = config_kv(cfg);
  meta["step"] = std::to_string(cfg.total_steps);
  save_checkpoint((fs::path(cfg.out_dir) / "checkpoint_final.json").string(), agent.model(),
                  meta);
  std::cout << "train: " << rows.size() << " episodes, " << cfg.total_steps
            << " steps, artifacts in " << cfg.out_dir << "\n";
  return 0;
}

/// Rebuilds config, environment and agent from checkpoint metadata, then
/// loads the stored parameters into the agent's main and target networks.
struct RestoredRun {
  TrainConfig cfg;
  std::unique_ptr<Env> env;
  std::unique_ptr<Agent> agent;
};

RestoredRun restore(const std::string& checkpoint,
                    const std::map<std::string, std::string>& overrides) {
  auto meta = read_checkpoint_meta(checkpoint);
  meta.erase("step");
  RestoredRun run;
  run.cfg = assemble_config(meta, overrides);
  run.env = make_env(run.cfg.env_name, run.cfg.grid_config());
  run.agent = std::make_unique<Agent>(run.cfg, *run.env);
  load_checkpoint(checkpoint, run.agent->model());
  run.agent->update_target();
  return run;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             const std::string& out_path) {
  RestoredRun run = restore(checkpoint, {});
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write \"" + out_path + "\"");
  out << "episode,return\n";
  double mean = 0.0;
  if (episodes > 0) {
    Rng root(seed);
    Rng env_rng = root.split(101);
    Rng explore_rng = root.split(102);
    const std::vector<double> returns =
        evaluate(*run.agent, *run.env, episodes, env_rng, explore_rng);
    for (std::size_t i = 0; i < returns.size(); ++i) {
      out << (i + 1) << ',' << fmt(returns[i]) << '\n';
      mean += returns[i];
    }
    mean /= static_cast<double>(returns.size());
  }
  std::cout << "eval: episodes=" << episodes << " mean_return=" << fmt(mean) << "\n";
  return 0;
}

GridCell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError("state must be \"x,y\"");
  return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
}

int cmd_dump_dist(const std::string& checkpoint, const std::string& state_spec, int action,
                  const std::string& out_path, int points) {
  RestoredRun run = restore(checkpoint, {});
  std::vector<double> obs;
  int state_id = -1;
  if (run.cfg.env_name == "gridworld") {
    auto* grid = dynamic_cast<GridWorld*>(run.env.get());
    const GridCell cell = parse_cell(state_spec);
    grid->set_cell(cell);  // validates the coordinates
    obs = grid->encode(cell);
    state_id = GridWorld::cell_index(cell);
  } else {
    std::stringstream ss(state_spec);
    std::string item;
    while (std::getline(ss, item, ',')) obs.push_back(std::stod(item));
    if (static_cast<int>(obs.size()) != run.env->obs_width()) {
      throw ValidationError("state spec has wrong dimension for " + run.cfg.env_name);
    }
  }
  if (action < 0 || action >= run.env->action_count()) {
    throw ValidationError("action out of range");
  }

  const ReturnDistributionView view = run.agent->main_view();
  const auto curve =
      dump_curve(view, make_features(obs, action, run.env->action_count()), points);
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write \"" + out_path + "\"");
  out << "x,value,representation,state_id,action\n";
  for (const auto& [x, v] : curve) {
    out << fmt(x) << ',' << fmt(v) << ',' << representation_name(view.rep) << ',' << state_id
        << ',' << action << '\n';
  }
  std::cout << "dump-dist: " << curve.size() << " rows -> " << out_path << "\n";
  return 0;
}

void write_atoms_csv(std::ofstream& out, int state_id, int action,
                     const EmpiricalDistribution& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << state_id << ',' << action << ',' << fmt(d.values[i]) << ',' << fmt(d.probs[i])
        << '\n';
  }
}

int cmd_compare_oracle(const std::string& checkpoint, int n_rollouts,
                       const std::string& states_spec, std::uint64_t seed,
                       const std::string& out_dir) {
  RestoredRun run = restore(checkpoint, {});
  if (run.cfg.env_name != "gridworld") {
    throw ValidationError("compare-oracle: only supported on the gridworld environment");
  }
  auto* grid = dynamic_cast<GridWorld*>(run.env.get());
  fs::create_directories(out_dir);

  std::vector<GridCell> cells;
  {
    std::stringstream ss(states_spec);
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (!item.empty()) cells.push_back(parse_cell(item));
    }
  }
  if (cells.empty()) throw ValidationError("compare-oracle: no probe states given");

  const GridWorldPlan plan = optimal_policy_gridworld(run.cfg.grid_config(), run.cfg.gamma);
  Rng root(seed);
  Rng mc_rng = root.split(201);
  Rng greedy_rng = root.split(202);

  // Greedy policy table of the loaded agent, for the suboptimal-policy
  // diagnostic rollouts.
  std::vector<int> learnt_policy(grid->state_count(), 0);
  for (int idx = 0; idx < grid->state_count(); ++idx) {
    const GridCell c = GridWorld::cell_from_index(idx);
    if (grid->is_terminal_cell(c)) continue;
    learnt_policy[idx] = run.agent->greedy_action(grid->encode(c), greedy_rng);
  }

  std::ofstream oracle_csv(fs::path(out_dir) / "oracle_optimal.csv");
  std::ofstream learnt_mc_csv(fs::path(out_dir) / "oracle_learnt_policy.csv");
  std::ofstream curve_csv(fs::path(out_dir) / "learnt_curves.csv");
  std::ofstream cmp_csv(fs::path(out_dir) / "comparison.csv");
  oracle_csv << "state_id,action,atom_value,probability\n";
  learnt_mc_csv << "state_id,action,atom_value,probability\n";
  curve_csv << "x,value,representation,state_id,action\n";
  cmp_csv << "state_id,action,metric,learnt_vs_oracle_distance\n";

  const ReturnDistributionView view = run.agent->main_view();
  for (const GridCell cell : cells) {
    if (grid->is_terminal_cell(cell)) {
      throw ValidationError("compare-oracle: probe state is terminal");
    }
    const int state_id = GridWorld::cell_index(cell);
    const int action = plan.policy[state_id];

    const EmpiricalDistribution oracle =
        mc_return_distribution(*grid, plan.policy, cell, action, n_rollouts, run.cfg.gamma,
                               mc_rng);
    const EmpiricalDistribution under_learnt =
        mc_return_distribution(*grid, learnt_policy, cell, action, n_rollouts, run.cfg.gamma,
                               mc_rng);
    write_atoms_csv(oracle_csv, state_id, action, oracle);
    write_atoms_csv(learnt_mc_csv, state_id, action, under_learnt);

    const std::vector<double> feats =
        make_features(grid->encode(cell), action, grid->action_count());
    for (const auto& [x, v] : dump_curve(view, feats)) {
      curve_csv << fmt(x) << ',' << fmt(v) << ',' << representation_name(view.rep) << ','
                << state_id << ',' << action << '\n';
    }
    const EmpiricalDistribution learnt = view_atoms(view, feats);
    for (const Metric m : {Metric::Kl, Metric::Cramer, Metric::Wasserstein}) {
      cmp_csv << state_id << ',' << action << ',' << metric_name(m) << ','
              << fmt(distance(learnt, oracle, m)) << '\n';
    }
  }
  std::cout << "compare-oracle: " << cells.size() << " states -> " << out_dir << "\n";
  return 0;
}

int cmd_probe_contraction(const std::string& metric_names, int n_mdps, int pairs,
                          double gamma, std::uint64_t seed, const std::string& out_path) {
  std::vector<Metric> metrics;
  if (metric_names == "all") {
    metrics = {Metric::Wasserstein, Metric::Cramer, Metric::Kl};
  } else if (metric_names == "kl") {
    metrics = {Metric::Kl};
  } else if (metric_names == "cramer") {
    metrics = {Metric::Cramer};
  } else if (metric_names == "wasserstein") {
    metrics = {Metric::Wasserstein};
  } else {
    throw ValidationError("unknown metric \"" + metric_names + "\"");
  }

  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write \"" + out_path + "\"");
  out << "mdp,pair,metric,ratio\n";
  Rng root(seed);
  for (const Metric metric : metrics) {
    double max_ratio = 0.0;
    Rng rng = root.split(static_cast<std::uint64_t>(metric) + 7);
    for (int m = 0; m < n_mdps; ++m) {
      const DiscreteMdp mdp = random_mdp(5, 2, 4, gamma, 0.2, rng);
      const ContractionProbeResult res = contraction_probe(mdp, metric, pairs, rng);
      for (std::size_t p = 0; p < res.ratios.size(); ++p) {
        out << m << ',' << p << ',' << metric_name(metric) << ',' << fmt(res.ratios[p]) << '\n';
      }
      max_ratio = std::max(max_ratio, res.max_ratio);
    }
    std::cout << "probe-contraction: metric=" << metric_name(metric)
              << " max_ratio=" << fmt(max_ratio) << " (gamma=" << gamma << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UMDQN distributional reinforcement learning toolkit"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a UMDQN agent");
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> direct;
  std::string algo, env_name, out_dir;
  std::int64_t steps = -1;
  std::int64_t seed_flag = -1;
  train->add_option("--config", config_file, "key=value config file");
  train->add_option("--set", sets, "config override key=value (repeatable)");
  train->add_option("--algo", algo, "umdqn-kl | umdqn-c | umdqn-w");
  train->add_option("--env", env_name, "gridworld | cartpole");
  train->add_option("--seed", seed_flag, "run seed");
  train->add_option("--steps", steps, "total environment steps");
  train->add_option("--out", out_dir, "output directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, out_path = "eval_returns.csv";
  int episodes = 100;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--out", out_path, "per-episode returns CSV");

  // dump-dist
  auto* dump = app.add_subcommand("dump-dist", "Dump the learnt distribution curve");
  std::string dump_checkpoint, state_spec, dump_out = "distribution.csv";
  int dump_action = 0, dump_points = 500;
  dump->add_option("--checkpoint", dump_checkpoint, "checkpoint JSON")->required();
  dump->add_option("--state", state_spec, "state spec (\"x,y\" for gridworld)")->required();
  dump->add_option("--action", dump_action, "action id");
  dump->add_option("--out", dump_out, "output CSV");
  dump->add_option("--points", dump_points, "curve resolution");

  // compare-oracle
  auto* cmp = app.add_subcommand("compare-oracle", "Compare learnt distributions with MC oracle");
  std::string cmp_checkpoint, cmp_states = "5,6;6,5;5,5;4,6;6,4;4,4;2,2;0,0";
  std::string cmp_out = "oracle_comparison";
  int rollouts = 10000;
  std::uint64_t cmp_seed = 0;
  cmp->add_option("--checkpoint", cmp_checkpoint, "checkpoint JSON")->required();
  cmp->add_option("--rollouts", rollouts, "MC rollouts per state");
  cmp->add_option("--states", cmp_states, "probe states \"x,y;x,y;...\"");
  cmp->add_option("--seed", cmp_seed, "oracle seed");
  cmp->add_option("--out", cmp_out, "output directory");

  // probe-contraction
  auto* probe = app.add_subcommand("probe-contraction", "Operator contraction probes");
  std::string probe_metric = "all", probe_out = "contraction.csv";
  int probe_mdps = 100, probe_pairs = 1;
  double probe_gamma = 0.5;
  std::uint64_t probe_seed = 0;
  probe->add_option("--metric", probe_metric, "kl | cramer | wasserstein | all");
  probe->add_option("--mdps", probe_mdps, "number of random MDPs");
  probe->add_option("--pairs", probe_pairs, "distribution pairs per MDP");
  probe->add_option("--gamma", probe_gamma, "discount factor");
  probe->add_option("--seed", probe_seed, "probe seed");
  probe->add_option("--out", probe_out, "ratio CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      auto overrides = parse_overrides(sets);
      if (!algo.empty()) overrides["algo"] = algo;
      if (!env_name.empty()) overrides["env"] = env_name;
      if (seed_flag >= 0) overrides["seed"] = std::to_string(seed_flag);
      if (steps >= 0) overrides["total_steps"] = std::to_string(steps);
      if (!out_dir.empty()) overrides["out_dir"] = out_dir;
      return cmd_train(config_file, overrides);
    }
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, episodes, eval_seed, out_path);
    if (dump->parsed()) {
      return cmd_dump_dist(dump_checkpoint, state_spec, dump_action, dump_out, dump_points);
    }
    if (cmp->parsed()) {
      return cmd_compare_oracle(cmp_checkpoint, rollouts, cmp_states, cmp_seed, cmp_out);
    }
    if (probe->parsed()) {
      return cmd_probe_contraction(probe_metric, probe_mdps, probe_pairs, probe_gamma,
                                   probe_seed, probe_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
