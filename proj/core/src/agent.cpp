#include "umdqn/agent.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

namespace {
// Sub-generator stream ids fanned out from the run seed.
constexpr std::uint64_t kStreamEnv = 1;
constexpr std::uint64_t kStreamExplore = 2;
constexpr std::uint64_t kStreamInit = 3;
constexpr std::uint64_t kStreamLearner = 4;
constexpr std::uint64_t kStreamEvalEnv = 5;
constexpr std::uint64_t kStreamEvalExplore = 6;
}  // namespace

ReplayMemory::ReplayMemory(int capacity) : capacity_(static_cast<std::size_t>(capacity)) {
  if (capacity < 1) throw DomainError("ReplayMemory: capacity must be >= 1");
  buf_.reserve(capacity_);
}

void ReplayMemory::push(Experience e) {
  if (buf_.size() < capacity_) {
    buf_.push_back(std::move(e));
    full_ = buf_.size() == capacity_;
  } else {
    // FIFO eviction: overwrite the oldest slot.
    buf_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
}

const Experience& ReplayMemory::at(std::size_t i) const {
  if (i >= buf_.size()) throw DomainError("ReplayMemory: index out of range");
  if (!full_) return buf_[i];
  return buf_[(head_ + i) % capacity_];
}

std::vector<const Experience*> ReplayMemory::sample(int n, Rng& rng) const {
  if (n < 1) throw DomainError("ReplayMemory: sample size must be >= 1");
  const std::size_t sz = size();
  if (sz < static_cast<std::size_t>(n)) return {};
  // Partial Fisher-Yates over a sparse index map: uniform without
  // replacement.
  std::unordered_map<std::size_t, std::size_t> swapped;
  std::vector<const Experience*> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(sz - k)));
    std::size_t vk = swapped.count(k) ? swapped[k] : k;
    std::size_t vj = swapped.count(j) ? swapped[j] : j;
    swapped[j] = vk;
    swapped[k] = vj;
    out.push_back(&at(vj));
  }
  return out;
}

double EpsilonSchedule::at(std::int64_t t) const {
  return end + (start - end) * std::exp(-static_cast<double>(t) / decay);
}

Agent::Agent(TrainConfig cfg, const Env& env)
    : cfg_(std::move(cfg)),
      n_actions_(env.action_count()),
      obs_width_(env.obs_width()),
      n_states_(env.state_count()),
      model_(),
      target_(),
      memory_(cfg_.memory_capacity),
      learn_rng_(Rng(cfg_.seed).split(kStreamLearner)) {
  cfg_.validate();
  if (cfg_.env_name != env.name()) {
    throw ValidationError("Agent: config environment \"" + cfg_.env_name +
                          "\" does not match \"" + env.name() + "\"");
  }
  Rng init_rng = Rng(cfg_.seed).split(kStreamInit);
  model_ = make_umnn_model(obs_width_ + n_actions_, cfg_.embed_width, cfg_.hidden_width,
                           cfg_.n_cc, init_rng);
  model_.latent = cfg_.latent_kind();
  target_ = model_.clone();
  if (n_states_ > 0) {
    action_cache_.assign(static_cast<std::size_t>(n_states_), {-1, 0});
  }
}

ReturnDistributionView Agent::main_view() const {
  return {cfg_.representation(), &model_, cfg_.domain()};
}

ReturnDistributionView Agent::target_view() const {
  return {cfg_.representation(), &target_, cfg_.domain()};
}

int Agent::greedy_action(std::span<const double> obs, Rng& rng) const {
  return next_action(main_view(), obs, n_actions_, expectation_params(), rng);
}

int Agent::select_action(std::span<const double> obs, double epsilon, Rng& rng) const {
  if (epsilon < 0.0 || epsilon > 1.0) throw DomainError("select_action: epsilon outside [0, 1]");
  if (rng.uniform() < epsilon) return rng.uniform_int(n_actions_);
  return greedy_action(obs, rng);
}

std::vector<const Experience*> Agent::sample_batch() {
  return memory_.sample(cfg_.batch_size, learn_rng_);
}

int Agent::next_action_for(const Experience& e) {
  if (e.s_next_id >= 0 && e.s_next_id < n_states_) {
    auto& slot = action_cache_[e.s_next_id];
    if (slot.first == target_version_) return slot.second;
    const int a = next_action(target_view(), e.s_next, n_actions_, expectation_params(),
                              learn_rng_);
    slot = {target_version_, a};
    return a;
  }
  return next_action(target_view(), e.s_next, n_actions_, expectation_params(), learn_rng_);
}

double Agent::train_step(std::span<const Experience* const> batch) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  const Representation rep = cfg_.representation();
  const ReturnDomain domain = cfg_.domain();
  const SampleGrid grid = sample_grid(domain, rep, learn_rng_);
  const std::size_t n_exp = batch.size();
  const std::size_t n_main = grid.main_points.size();
  const std::size_t n_target = grid.target_points.size();

  // Operator targets under theta^-; constants for the optimiser.
  y_.assign(n_exp * n_target, 0.0);
  for (std::size_t e = 0; e < n_exp; ++e) {
    const Experience& exp = *batch[e];
    double* row = y_.data() + e * n_target;
    if (exp.terminal) {
      for (std::size_t k = 0; k < n_target; ++k) {
        row[k] = terminal_target(rep, exp.r, grid.target_points[k], domain);
      }
    } else {
      const int a_next = next_action_for(exp);
      const Conditioning cond =
          condition(target_, make_features(exp.s_next, a_next, n_actions_));
      const std::vector<double> vals =
          operator_target_batch(target_view(), cond, exp.r, cfg_.gamma, grid.target_points);
      std::copy(vals.begin(), vals.end(), row);
    }
  }

  // Main-side evaluation with records for the reverse pass.
  std::vector<Conditioning> conds(n_exp);
  std::vector<ViewEval> evals(n_exp);
  vals_.assign(n_exp * n_main, 0.0);
  for (std::size_t e = 0; e < n_exp; ++e) {
    const Experience& exp = *batch[e];
    conds[e] = condition(model_, make_features(exp.s, exp.a, n_actions_));
    evals[e] = view_eval(rep, model_, conds[e], grid.main_points);
    std::copy(evals[e].values.begin(), evals[e].values.end(), vals_.data() + e * n_main);
  }

  double loss = 0.0;
  dvals_.assign(n_exp * n_main, 0.0);
  switch (rep) {
    case Representation::Pdf:
      loss = kl_loss(y_, vals_, dvals_);
      break;
    case Representation::Cdf:
      loss = cramer_loss(y_, vals_, static_cast<int>(n_main), dvals_);
      break;
    case Representation::Qf: {
      delta_.assign(n_exp * n_main * n_target, 0.0);
      for (std::size_t e = 0; e < n_exp; ++e) {
        const double* yrow = y_.data() + e * n_target;
        const double* grow = vals_.data() + e * n_main;
        double* drow = delta_.data() + e * n_main * n_target;
        for (std::size_t i = 0; i < n_main; ++i) {
          const double gi = grow[i];
          double* dij = drow + i * n_target;
          for (std::size_t j = 0; j < n_target; ++j) dij[j] = yrow[j] - gi;
        }
      }
      ddelta_.assign(delta_.size(), 0.0);
      loss = wasserstein_loss(delta_, grid.main_points, static_cast<int>(n_target), cfg_.kappa,
                              ddelta_);
      for (std::size_t e = 0; e < n_exp; ++e) {
        const double* dd = ddelta_.data() + e * n_main * n_target;
        double* dv = dvals_.data() + e * n_main;
        for (std::size_t i = 0; i < n_main; ++i) {
          double acc = 0.0;
          const double* row = dd + i * n_target;
          for (std::size_t j = 0; j < n_target; ++j) acc += row[j];
          dv[i] = -acc;
        }
      }
      break;
    }
  }

  if (!std::isfinite(loss)) {
    ++aborted_steps_;
    std::cerr << "warning: non-finite loss (" << loss << ") at train step " << train_steps_
              << "; update skipped\n";
    auto params = model_.parameters();
    zero_grads(params);
    return loss;
  }

  for (std::size_t e = 0; e < n_exp; ++e) {
    view_eval_backward(rep, model_, conds[e], evals[e],
                       std::span<const double>(dvals_.data() + e * n_main, n_main));
  }

  auto params = model_.parameters();
  clip_grad_norm(params, cfg_.grad_clip);
  adam_step(params, adam_, cfg_.lr, cfg_.adam_eps);
  ++train_steps_;
  return loss;
}

void Agent::update_target() {
  target_.assign_values(model_);
  ++target_version_;
}

std::vector<TrainLogRow> run_training(Agent& agent, Env& env, const TrainHooks& hooks) {
  const TrainConfig& cfg = agent.cfg();
  if (env.action_count() != agent.action_count()) {
    throw ValidationError("run_training: environment/agent action spaces disagree");
  }
  const Rng root(cfg.seed);
  Rng env_rng = root.split(kStreamEnv);
  Rng explore_rng = root.split(kStreamExplore);
  Rng eval_env_rng = root.split(kStreamEvalEnv);
  Rng eval_explore_rng = root.split(kStreamEvalExplore);
  std::unique_ptr<Env> eval_env = env.clone_spec();

  const EpsilonSchedule schedule{cfg.eps_start, cfg.eps_end, cfg.eps_decay};
  std::vector<TrainLogRow> rows;
  std::vector<double> episode_losses;
  double episode_return = 0.0;
  std::int64_t episodes = 0;

  std::vector<double> obs = env.reset(env_rng);
  for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
    const double eps = schedule.at(t);
    int action;
    if (hooks.action_override) {
      action = hooks.action_override(obs, t);
    } else {
      action = agent.select_action(obs, eps, explore_rng);
    }

    Experience e;
    e.s = obs;
    e.a = action;
    e.s_id = env.state_id().value_or(-1);
    const StepResult res = env.step(action, env_rng);
    e.s_next = res.obs;
    e.r = res.reward;
    e.terminal = res.terminal;
    e.s_next_id = env.state_id().value_or(-1);
    agent.memory().push(std::move(e));
    episode_return += res.reward;

    if (agent.memory().size() >= static_cast<std::size_t>(cfg.batch_size) &&
        t % cfg.main_update_every == 0) {
      const auto batch = agent.sample_batch();
      if (!batch.empty()) episode_losses.push_back(agent.train_step(batch));
    }

    if ((t + 1) % cfg.target_update_every == 0) {
      agent.update_target();
      agent.note_target_update_step(t + 1);
    }
    if (hooks.on_checkpoint && (t + 1) % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(agent, t + 1);
    }

    if (res.terminal || res.truncated) {
      ++episodes;
      TrainLogRow row;
      row.episode = episodes;
      row.env_steps = t + 1;
      row.epsilon = eps;
      row.episode_return = episode_return;
      if (!episode_losses.empty()) {
        double acc = 0.0;
        for (double l : episode_losses) acc += l;
        row.train_loss_mean = acc / static_cast<double>(episode_losses.size());
        row.has_loss = true;
      }
      if (cfg.eval_episodes > 0 && episodes % cfg.eval_every_episodes == 0) {
        const std::vector<double> returns =
            evaluate(agent, *eval_env, cfg.eval_episodes, eval_env_rng, eval_explore_rng);
        double acc = 0.0;
        for (double r : returns) acc += r;
        row.eval_return_mean = acc / static_cast<double>(returns.size());
        row.has_eval = true;
      }
      rows.push_back(std::move(row));
      episode_losses.clear();
      episode_return = 0.0;
      obs = env.reset(env_rng);
    } else {
      obs = res.obs;
    }
  }
  return rows;
}

std::vector<double> evaluate(const Agent& agent, Env& env, int episodes, Rng& env_rng,
                             Rng& explore_rng) {
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> obs = env.reset(env_rng);
    double ret = 0.0;
    while (true) {
      const int action = agent.select_action(obs, agent.cfg().eps_test, explore_rng);
      const StepResult res = env.step(action, env_rng);
      ret += res.reward;
      if (res.terminal || res.truncated) break;
      obs = res.obs;
    }
    returns.push_back(ret);
  }
  return returns;
}

void write_training_log(const std::string& path, std::span<const TrainLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("write_training_log: cannot write \"" + path + "\"");
  out << "episode,env_steps,train_loss_mean,eval_return_mean,epsilon\n";
  char buf[64];
  for (const TrainLogRow& row : rows) {
    out << row.episode << ',' << row.env_steps << ',';
    if (row.has_loss) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.train_loss_mean);
      out << buf;
    }
    out << ',';
    if (row.has_eval) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.eval_return_mean);
      out << buf;
    }
    out << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.epsilon);
    out << buf << '\n';
  }
}

}  // namespace umdqn
