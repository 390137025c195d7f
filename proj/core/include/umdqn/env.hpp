#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umdqn/rng.hpp"

namespace umdqn {

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool terminal = false;   // true MDP termination; what replay stores
  bool truncated = false;  // episode cap hit; ends the episode only
};

/// Uniform step/reset interface over the benchmark environments. The
/// environment evolution depends only on the generator passed in and the
/// action sequence.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual int action_count() const = 0;
  virtual int obs_width() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(int action, Rng& rng) = 0;
  /// Discrete state index for finite environments; empty otherwise.
  virtual std::optional<int> state_id() const { return std::nullopt; }
  virtual int state_count() const { return 0; }
  /// Fresh instance of the same environment (for evaluation episodes).
  virtual std::unique_ptr<Env> clone_spec() const = 0;
};

struct GridCell {
  int x = 0;
  int y = 0;
  bool operator==(const GridCell&) const = default;
};

struct GridWorldConfig {
  GridCell target{6, 6};
  GridCell trap{3, 3};
  double reward_sigma = 0.1;
  double double_move_prob = 0.5;
  int step_cap = 1000;

  void validate() const;
};

/// 7x7 stochastic grid world: moves land 1 or 2 cells in the chosen
/// direction (no border crossing), rewards are Gaussian around +1 at the
/// target, -1 at the trap and 0 elsewhere; target and trap are terminal.
class GridWorld final : public Env {
 public:
  static constexpr int kSize = 7;
  enum Action { kRight = 0, kUp = 1, kLeft = 2, kDown = 3 };

  explicit GridWorld(GridWorldConfig config = {});

  std::string name() const override { return "gridworld"; }
  int action_count() const override { return 4; }
  int obs_width() const override { return 2; }
  std::vector<double> reset(Rng& rng) override;
  StepResult step(int action, Rng& rng) override;
  std::optional<int> state_id() const override { return cell_index(cell_); }
  int state_count() const override { return kSize * kSize; }
  std::unique_ptr<Env> clone_spec() const override;

  const GridWorldConfig& config() const { return config_; }
  GridCell cell() const { return cell_; }
  /// Teleports to a cell and restarts the episode step counter; used by the
  /// oracle to roll out from arbitrary start states.
  void set_cell(GridCell cell);
  bool is_terminal_cell(GridCell cell) const;
  std::vector<double> encode(GridCell cell) const;

  static int cell_index(GridCell cell) { return cell.y * kSize + cell.x; }
  static GridCell cell_from_index(int idx) { return {idx % kSize, idx / kSize}; }
  static GridCell displace(GridCell from, int action, int distance);

 private:
  GridWorldConfig config_;
  GridCell cell_;
  int episode_steps_ = 0;
};

/// Classic cart-pole balancing task: 4-dimensional state (cart position,
/// cart velocity, pole angle, pole tip velocity), +1 reward per step,
/// termination at |angle| > 12 degrees, |position| > 2.4 or 200 steps.
class CartPole final : public Env {
 public:
  std::string name() const override { return "cartpole"; }
  int action_count() const override { return 2; }
  int obs_width() const override { return 4; }
  std::vector<double> reset(Rng& rng) override;
  StepResult step(int action, Rng& rng) override;
  std::unique_ptr<Env> clone_spec() const override;

  std::span<const double, 4> state() const { return std::span<const double, 4>(state_); }
  static constexpr int kMaxEpisodeSteps = 200;

 private:
  double state_[4] = {0, 0, 0, 0};
  int episode_steps_ = 0;
  bool done_ = true;
};

/// Environment selection by name: "gridworld" or "cartpole". Throws
/// ValidationError for unknown names.
std::unique_ptr<Env> make_env(const std::string& name, const GridWorldConfig& grid_config = {});

}  // namespace umdqn
