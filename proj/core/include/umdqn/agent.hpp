#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umdqn/bellman.hpp"
#include "umdqn/config.hpp"
#include "umdqn/distrib.hpp"
#include "umdqn/env.hpp"
#include "umdqn/umnn.hpp"

namespace umdqn {

/// One transition tuple; the unit of replay storage. State ids are kept
/// alongside the encoded observations for finite environments (-1
/// otherwise).
struct Experience {
  std::vector<double> s;
  std::vector<double> s_next;
  int a = 0;
  double r = 0.0;
  bool terminal = false;
  int s_id = -1;
  int s_next_id = -1;
};

/// Bounded FIFO buffer of experiences.
class ReplayMemory {
 public:
  explicit ReplayMemory(int capacity);

  void push(Experience e);
  std::size_t size() const { return buf_.size(); }
  int capacity() const { return static_cast<int>(capacity_); }
  /// Index 0 is the oldest surviving experience.
  const Experience& at(std::size_t i) const;

  /// n experiences drawn uniformly without replacement; returns an empty
  /// batch (the skip signal) when fewer than n are stored.
  std::vector<const Experience*> sample(int n, Rng& rng) const;

 private:
  std::size_t capacity_ = 0;
  std::vector<Experience> buf_;
  std::size_t head_ = 0;
  bool full_ = false;
};

/// epsilon(t) = end + (start - end) * exp(-t / decay).
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  double decay = 10000;

  double at(std::int64_t t) const;
};

struct TrainLogRow {
  std::int64_t episode = 0;  // 1-based completed episode index
  std::int64_t env_steps = 0;
  double train_loss_mean = 0.0;
  bool has_loss = false;
  double eval_return_mean = 0.0;
  bool has_eval = false;
  double epsilon = 0.0;
  double episode_return = 0.0;  // not part of the CSV schema
};

/// The UMDQN learner: main and target networks, optimiser state, replay
/// memory and the per-variant loss assembly.
class Agent {
 public:
  Agent(TrainConfig cfg, const Env& env);

  const TrainConfig& cfg() const { return cfg_; }
  UmnnModel& model() { return model_; }
  const UmnnModel& model() const { return model_; }
  UmnnModel& target_model() { return target_; }
  ReturnDistributionView main_view() const;
  ReturnDistributionView target_view() const;
  ReplayMemory& memory() { return memory_; }
  const ReplayMemory& memory() const { return memory_; }
  int action_count() const { return n_actions_; }
  ExpectationParams expectation_params() const { return {cfg_.simpson_points, cfg_.n_mc}; }

  /// Greedy action under the main view (ties to the lowest index). The
  /// generator drives the expectation estimates.
  int greedy_action(std::span<const double> obs, Rng& rng) const;
  /// epsilon-greedy behaviour action.
  int select_action(std::span<const double> obs, double epsilon, Rng& rng) const;

  /// Samples a minibatch from replay (empty batch when memory is still
  /// below the batch size).
  std::vector<const Experience*> sample_batch();

  /// One optimisation step on the batch: shared evaluation grid, operator
  /// targets under the frozen parameters, representation loss, clipped
  /// gradients, Adam. Returns the loss; a non-finite loss aborts the
  /// update and is reported.
  double train_step(std::span<const Experience* const> batch);

  /// theta^- <- theta.
  void update_target();

  std::int64_t train_steps() const { return train_steps_; }
  std::int64_t aborted_steps() const { return aborted_steps_; }
  const std::vector<std::int64_t>& target_update_steps() const { return target_update_steps_; }
  void note_target_update_step(std::int64_t env_step) { target_update_steps_.push_back(env_step); }

 private:
  int next_action_for(const Experience& e);

  TrainConfig cfg_;
  int n_actions_ = 0;
  int obs_width_ = 0;
  int n_states_ = 0;  // 0 for continuous environments
  UmnnModel model_;
  UmnnModel target_;
  AdamState adam_;
  ReplayMemory memory_;
  Rng learn_rng_;
  std::int64_t train_steps_ = 0;
  std::int64_t aborted_steps_ = 0;
  std::int64_t target_version_ = 0;
  std::vector<std::int64_t> target_update_steps_;
  // Greedy next actions are frozen per target version on finite state
  // spaces; entries hold (version, action).
  std::vector<std::pair<std::int64_t, int>> action_cache_;
  // Step scratch, reused across train_step calls.
  std::vector<double> y_, vals_, dvals_, delta_, ddelta_;
};

struct TrainHooks {
  std::function<void(const Agent&, std::int64_t env_steps)> on_checkpoint;
  /// Test hook: overrides behaviour action selection when set.
  std::function<int(std::span<const double> obs, std::int64_t t)> action_override;
};

/// Algorithm 1-style interleaving: act every step, learn every
/// main_update_every steps once the memory holds a full batch, refresh the
/// target every target_update_every steps, anneal epsilon, run evaluation
/// episodes every eval_every_episodes completed episodes, and emit one log
/// row per completed episode.
std::vector<TrainLogRow> run_training(Agent& agent, Env& env, const TrainHooks& hooks = {});

/// Greedy evaluation episodes at eps_test; returns per-episode cumulative
/// rewards.
std::vector<double> evaluate(const Agent& agent, Env& env, int episodes, Rng& env_rng,
                             Rng& explore_rng);

/// Writes rows under the documented header
/// episode,env_steps,train_loss_mean,eval_return_mean,epsilon
/// with empty cells for absent values.
void write_training_log(const std::string& path, std::span<const TrainLogRow> rows);

}  // namespace umdqn
