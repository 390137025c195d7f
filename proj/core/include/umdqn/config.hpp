#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "umdqn/distrib.hpp"
#include "umdqn/env.hpp"

namespace umdqn {

/// The three UMDQN variants; each algorithm is tied to one representation
/// (KL <-> PDF, Cramer <-> CDF, Wasserstein <-> QF).
enum class Algo { UmdqnKl, UmdqnC, UmdqnW };

const char* algo_name(Algo algo);
Algo parse_algo(const std::string& name);
Representation algo_representation(Algo algo);

/// Full experiment configuration: algorithm/environment selection plus
/// every training hyperparameter, with built-in per-environment defaults.
struct TrainConfig {
  Algo algo = Algo::UmdqnC;
  std::string env_name = "gridworld";
  std::uint64_t seed = 0;
  std::int64_t total_steps = 100000;
  std::string out_dir = "runs/run";

  // Network structure.
  int embed_width = 128;
  int hidden_width = 128;
  int n_cc = 32;
  std::string latent = "logistic";

  // Optimisation.
  double gamma = 0.5;
  double lr = 1e-4;
  double adam_eps = 1e-5;
  double grad_clip = 1.0;
  int main_update_every = 1;     // T'
  int target_update_every = 1000;  // N-
  int memory_capacity = 10000;   // C
  int batch_size = 32;           // N_e

  // Exploration.
  double eps_start = 1.0;
  double eps_end = 0.01;
  double eps_decay = 10000;
  double eps_test = 0.001;

  // Distribution discretisation.
  int n_z = 200;
  int n_tau = 200;
  double z_min = -2.0;
  double z_max = 2.0;
  double kappa = 1.0;
  int simpson_points = 201;
  int n_mc = 256;

  // Evaluation and artifacts.
  int eval_every_episodes = 50;
  int eval_episodes = 10;
  std::int64_t checkpoint_every = 10000;
  int log_smooth_window = 20;

  // Grid world knobs.
  int grid_target_x = 6;
  int grid_target_y = 6;
  int grid_trap_x = 3;
  int grid_trap_y = 3;
  double grid_reward_sigma = 0.1;
  double grid_double_move_prob = 0.5;
  int grid_step_cap = 1000;

  Representation representation() const { return algo_representation(algo); }
  ReturnDomain domain() const { return {z_min, z_max, n_z, n_tau}; }
  GridWorldConfig grid_config() const;
  Latent latent_kind() const;

  void validate() const;
};

/// Built-in defaults for the named environment (domain bounds and discount
/// differ per environment).
TrainConfig default_config(const std::string& env_name);

/// Applies one key=value override; throws ValidationError for unknown keys
/// or unparsable values.
void apply_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses a line-oriented key=value file ('#' comments and blank lines
/// allowed) into an ordered map.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Assembles a config with precedence: CLI overrides > file values >
/// built-in environment defaults. The environment is taken from the
/// overrides first, then the file, then the default name.
TrainConfig assemble_config(const std::map<std::string, std::string>& file_kv,
                            const std::map<std::string, std::string>& override_kv);

/// Canonical key=value echo of a config (sorted keys; drives manifests,
/// checkpoints and the content hash).
std::map<std::string, std::string> config_kv(const TrainConfig& cfg);

/// FNV-1a 64-bit hash of the canonical config text, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);

}  // namespace umdqn
