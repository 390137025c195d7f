#include "umdqn/env.hpp"

#include <cmath>

#include "umdqn/errors.hpp"

namespace umdqn {

void GridWorldConfig::validate() const {
  auto in_grid = [](GridCell c) {
    return c.x >= 0 && c.x < GridWorld::kSize && c.y >= 0 && c.y < GridWorld::kSize;
  };
  if (!in_grid(target) || !in_grid(trap)) {
    throw ValidationError("GridWorldConfig: target/trap outside the grid");
  }
  if (target == trap) throw ValidationError("GridWorldConfig: target must differ from trap");
  if (double_move_prob < 0.0 || double_move_prob > 1.0) {
    throw ValidationError("GridWorldConfig: double_move_prob outside [0, 1]");
  }
  if (reward_sigma < 0.0) throw ValidationError("GridWorldConfig: reward_sigma must be >= 0");
  if (step_cap < 1) throw ValidationError("GridWorldConfig: step_cap must be >= 1");
}

GridWorld::GridWorld(GridWorldConfig config) : config_(config) {
  config_.validate();
  cell_ = config_.target;  // unusable until reset
}

std::vector<double> GridWorld::reset(Rng& rng) {
  // Uniform over the 47 non-terminal cells.
  const int n_free = kSize * kSize - 2;
  int pick = rng.uniform_int(n_free);
  for (int idx = 0; idx < kSize * kSize; ++idx) {
    const GridCell c = cell_from_index(idx);
    if (is_terminal_cell(c)) continue;
    if (pick == 0) {
      cell_ = c;
      break;
    }
    --pick;
  }
  episode_steps_ = 0;
  return encode(cell_);
}

GridCell GridWorld::displace(GridCell from, int action, int distance) {
  GridCell c = from;
  switch (action) {
    case kRight:
      c.x += distance;
      break;
    case kUp:
      c.y += distance;
      break;
    case kLeft:
      c.x -= distance;
      break;
    case kDown:
      c.y -= distance;
      break;
    default:
      throw DomainError("GridWorld: unknown action " + std::to_string(action));
  }
  c.x = std::min(std::max(c.x, 0), kSize - 1);
  c.y = std::min(std::max(c.y, 0), kSize - 1);
  return c;
}

StepResult GridWorld::step(int action, Rng& rng) {
  if (is_terminal_cell(cell_)) throw UsageError("GridWorld: step on a terminal state");
  const int distance = rng.uniform() < config_.double_move_prob ? 2 : 1;
  // The move resolves as one displacement; only the landing cell counts.
  const GridCell landing = displace(cell_, action, distance);
  double mu = 0.0;
  if (landing == config_.target) mu = 1.0;
  if (landing == config_.trap) mu = -1.0;
  const double reward = rng.normal(mu, config_.reward_sigma);

  cell_ = landing;
  ++episode_steps_;
  StepResult res;
  res.obs = encode(cell_);
  res.reward = reward;
  res.terminal = is_terminal_cell(landing);
  res.truncated = !res.terminal && episode_steps_ >= config_.step_cap;
  return res;
}

std::unique_ptr<Env> GridWorld::clone_spec() const { return std::make_unique<GridWorld>(config_); }

void GridWorld::set_cell(GridCell cell) {
  if (cell.x < 0 || cell.x >= kSize || cell.y < 0 || cell.y >= kSize) {
    throw DomainError("GridWorld: cell outside the grid");
  }
  cell_ = cell;
  episode_steps_ = 0;
}

bool GridWorld::is_terminal_cell(GridCell cell) const {
  return cell == config_.target || cell == config_.trap;
}

std::vector<double> GridWorld::encode(GridCell cell) const {
  return {static_cast<double>(cell.x) / (kSize - 1), static_cast<double>(cell.y) / (kSize - 1)};
}

namespace {
// Standard cart-pole physics constants.
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kMassPole * kHalfLength;
constexpr double kForce = 10.0;
constexpr double kDt = 0.02;
constexpr double kAngleLimit = 12.0 * 2.0 * M_PI / 360.0;
constexpr double kPositionLimit = 2.4;
}  // namespace

std::vector<double> CartPole::reset(Rng& rng) {
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  episode_steps_ = 0;
  done_ = false;
  return std::vector<double>(state_, state_ + 4);
}

StepResult CartPole::step(int action, Rng&) {
  if (done_) throw UsageError("CartPole: step on a finished episode");
  if (action != 0 && action != 1) {
    throw DomainError("CartPole: unknown action " + std::to_string(action));
  }
  double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  // Semi-implicit-free Euler update, matching the classic formulation.
  x += kDt * x_dot;
  x_dot += kDt * x_acc;
  theta += kDt * theta_dot;
  theta_dot += kDt * theta_acc;
  state_[0] = x;
  state_[1] = x_dot;
  state_[2] = theta;
  state_[3] = theta_dot;
  ++episode_steps_;

  const bool failed = std::abs(x) > kPositionLimit || std::abs(theta) > kAngleLimit;
  const bool out_of_time = episode_steps_ >= kMaxEpisodeSteps;
  done_ = failed || out_of_time;

  StepResult res;
  res.obs = std::vector<double>(state_, state_ + 4);
  res.reward = 1.0;
  res.terminal = done_;
  res.truncated = false;
  return res;
}

std::unique_ptr<Env> CartPole::clone_spec() const { return std::make_unique<CartPole>(); }

std::unique_ptr<Env> make_env(const std::string& name, const GridWorldConfig& grid_config) {
  if (name == "gridworld") return std::make_unique<GridWorld>(grid_config);
  if (name == "cartpole") return std::make_unique<CartPole>();
  throw ValidationError("make_env: unknown environment \"" + name + "\"");
}

}  // namespace umdqn
