#include "umdqn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

namespace {
constexpr double kProbTol = 1e-9;
}

EmpiricalDistribution EmpiricalDistribution::from_samples(std::vector<double> samples) {
  if (samples.empty()) throw DomainError("EmpiricalDistribution: no samples");
  std::sort(samples.begin(), samples.end());
  std::vector<double> probs(samples.size(), 1.0 / static_cast<double>(samples.size()));
  return from_atoms(std::move(samples), std::move(probs));
}

EmpiricalDistribution EmpiricalDistribution::from_atoms(std::vector<double> values,
                                                        std::vector<double> probs,
                                                        double merge_tol) {
  if (values.empty() || values.size() != probs.size()) {
    throw DomainError("EmpiricalDistribution: empty or mismatched atom list");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  EmpiricalDistribution d;
  d.values.reserve(values.size());
  d.probs.reserve(values.size());
  double total = 0.0;
  for (std::size_t k : order) {
    const double v = values[k];
    const double p = probs[k];
    if (!(p > 0.0)) {
      if (p == 0.0) continue;
      throw DomainError("EmpiricalDistribution: negative probability");
    }
    total += p;
    if (!d.values.empty() && v - d.values.back() <= merge_tol) {
      d.probs.back() += p;
    } else {
      d.values.push_back(v);
      d.probs.push_back(p);
    }
  }
  if (d.values.empty()) throw DomainError("EmpiricalDistribution: zero total mass");
  if (std::abs(total - 1.0) > kProbTol) {
    throw DomainError("EmpiricalDistribution: probabilities sum to " + std::to_string(total));
  }
  for (double& p : d.probs) p /= total;
  return d;
}

double EmpiricalDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

double EmpiricalDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m;
    v += probs[i] * d * d;
  }
  return v;
}

double EmpiricalDistribution::quantile(double tau) const {
  if (values.empty()) throw DomainError("quantile: empty distribution");
  if (tau < 0.0 || tau > 1.0) throw DomainError("quantile: tau outside [0, 1]");
  double cum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    cum += probs[i];
    if (cum >= tau) return values[i];
  }
  return values.back();
}

double EmpiricalDistribution::cdf(double z) const {
  double cum = 0.0;
  for (std::size_t i = 0; i < values.size() && values[i] <= z; ++i) cum += probs[i];
  return cum;
}

void DiscreteMdp::validate() const {
  if (n_states < 1 || n_actions < 1) throw ValidationError("DiscreteMdp: empty state/action space");
  if (gamma < 0.0 || gamma >= 1.0) throw ValidationError("DiscreteMdp: gamma outside [0, 1)");
  if (static_cast<int>(transitions.size()) != n_states ||
      static_cast<int>(rewards.size()) != n_states ||
      static_cast<int>(terminal.size()) != n_states) {
    throw ValidationError("DiscreteMdp: table sizes disagree with n_states");
  }
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(transitions[s].size()) != n_actions ||
        static_cast<int>(rewards[s].size()) != n_actions) {
      throw ValidationError("DiscreteMdp: table sizes disagree with n_actions");
    }
    for (int a = 0; a < n_actions; ++a) {
      double pt = 0.0;
      for (const auto& [sn, p] : transitions[s][a]) {
        if (sn < 0 || sn >= n_states) throw ValidationError("DiscreteMdp: bad next state");
        pt += p;
      }
      if (std::abs(pt - 1.0) > kProbTol) {
        throw ValidationError("DiscreteMdp: transition row does not sum to 1");
      }
      double pr = 0.0;
      for (const RewardAtom& ra : rewards[s][a]) pr += ra.prob;
      if (std::abs(pr - 1.0) > kProbTol) {
        throw ValidationError("DiscreteMdp: reward atoms do not sum to 1");
      }
    }
  }
}

AtomTable exact_operator(const DiscreteMdp& mdp, const AtomTable& z, std::span<const int> policy,
                         std::size_t atom_cap) {
  mdp.validate();
  if (static_cast<int>(policy.size()) != mdp.n_states) {
    throw DimensionError("exact_operator: policy size mismatch");
  }
  AtomTable out(mdp.n_states, std::vector<EmpiricalDistribution>(mdp.n_actions));
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<double> values, probs;
      for (const auto& [sn, pt] : mdp.transitions[s][a]) {
        if (mdp.terminal[sn]) {
          for (const RewardAtom& ra : mdp.rewards[s][a]) {
            values.push_back(ra.value);
            probs.push_back(pt * ra.prob);
          }
        } else {
          const EmpiricalDistribution& next = z[sn][policy[sn]];
          for (const RewardAtom& ra : mdp.rewards[s][a]) {
            for (std::size_t k = 0; k < next.size(); ++k) {
              values.push_back(ra.value + mdp.gamma * next.values[k]);
              probs.push_back(pt * ra.prob * next.probs[k]);
            }
          }
        }
        if (values.size() > atom_cap) {
          throw ResourceError("exact_operator: atom count exceeds the cap");
        }
      }
      out[s][a] = EmpiricalDistribution::from_atoms(std::move(values), std::move(probs));
    }
  }
  return out;
}

namespace {

/// One (r, s') outcome of the operator mixture, seen through its quantile
/// function: a weighted piecewise-constant map tau -> value.
struct QfOutcome {
  double weight = 0.0;
  std::vector<double> values;  // transformed atom values, ascending
  std::vector<double> cum;     // cumulative probabilities, last == 1
};

}  // namespace

AtomTable qf_approx_operator(const DiscreteMdp& mdp, const AtomTable& z,
                             std::span<const int> policy, std::size_t atom_cap) {
  mdp.validate();
  if (static_cast<int>(policy.size()) != mdp.n_states) {
    throw DimensionError("qf_approx_operator: policy size mismatch");
  }
  AtomTable out(mdp.n_states, std::vector<EmpiricalDistribution>(mdp.n_actions));
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<QfOutcome> outcomes;
      for (const auto& [sn, pt] : mdp.transitions[s][a]) {
        for (const RewardAtom& ra : mdp.rewards[s][a]) {
          QfOutcome o;
          o.weight = pt * ra.prob;
          if (o.weight <= 0.0) continue;
          if (mdp.terminal[sn]) {
            o.values = {ra.value};
            o.cum = {1.0};
          } else {
            const EmpiricalDistribution& next = z[sn][policy[sn]];
            o.values.resize(next.size());
            o.cum.resize(next.size());
            double c = 0.0;
            for (std::size_t k = 0; k < next.size(); ++k) {
              o.values[k] = ra.value + mdp.gamma * next.values[k];
              c += next.probs[k];
              o.cum[k] = c;
            }
            o.cum.back() = 1.0;
          }
          outcomes.push_back(std::move(o));
        }
      }

      // The averaged quantile function is piecewise constant on the union
      // of the outcomes' breakpoints; sweep the segments exactly.
      std::vector<double> cuts;
      for (const QfOutcome& o : outcomes) {
        cuts.insert(cuts.end(), o.cum.begin(), o.cum.end());
      }
      cuts.push_back(1.0);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      if (cuts.size() > atom_cap) {
        throw ResourceError("qf_approx_operator: atom count exceeds the cap");
      }

      std::vector<double> values, probs;
      std::vector<std::size_t> idx(outcomes.size(), 0);
      double prev = 0.0;
      for (double cut : cuts) {
        if (cut <= prev || cut > 1.0) continue;
        // No breakpoint lies strictly inside (prev, cut], so the midpoint
        // identifies each outcome's active atom.
        const double m = 0.5 * (prev + cut);
        double v = 0.0;
        for (std::size_t o = 0; o < outcomes.size(); ++o) {
          while (idx[o] + 1 < outcomes[o].cum.size() && outcomes[o].cum[idx[o]] < m) ++idx[o];
          v += outcomes[o].weight * outcomes[o].values[idx[o]];
        }
        values.push_back(v);
        probs.push_back(cut - prev);
        prev = cut;
      }
      out[s][a] = EmpiricalDistribution::from_atoms(std::move(values), std::move(probs));
    }
  }
  return out;
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Kl:
      return "kl";
    case Metric::Cramer:
      return "cramer";
    case Metric::Wasserstein:
      return "wasserstein";
  }
  return "?";
}

namespace {

double cramer_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  std::vector<double> cuts;
  cuts.reserve(a.size() + b.size());
  cuts.insert(cuts.end(), a.values.begin(), a.values.end());
  cuts.insert(cuts.end(), b.values.begin(), b.values.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double integral = 0.0;
  double fa = 0.0, fb = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    while (ia < a.size() && a.values[ia] <= cuts[k]) fa += a.probs[ia++];
    while (ib < b.size() && b.values[ib] <= cuts[k]) fb += b.probs[ib++];
    const double d = fa - fb;
    integral += (cuts[k + 1] - cuts[k]) * d * d;
  }
  return std::sqrt(integral);
}

double wasserstein_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  // Shared sweep over both quantile partitions; exact for atom lists.
  std::vector<double> cum_a(a.size()), cum_b(b.size());
  double c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cum_a[i] = (c += a.probs[i]);
  cum_a.back() = 1.0;
  c = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) cum_b[i] = (c += b.probs[i]);
  cum_b.back() = 1.0;

  std::vector<double> cuts;
  cuts.reserve(a.size() + b.size());
  cuts.insert(cuts.end(), cum_a.begin(), cum_a.end());
  cuts.insert(cuts.end(), cum_b.begin(), cum_b.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double dist = 0.0;
  double prev = 0.0;
  std::size_t ia = 0, ib = 0;
  for (double cut : cuts) {
    if (cut <= prev || cut > 1.0) continue;
    const double m = 0.5 * (prev + cut);
    while (ia + 1 < a.size() && cum_a[ia] < m) ++ia;
    while (ib + 1 < b.size() && cum_b[ib] < m) ++ib;
    dist += (cut - prev) * std::abs(a.values[ia] - b.values[ib]);
    prev = cut;
  }
  return dist;
}

double silverman_bandwidth(const EmpiricalDistribution& d, double range) {
  const double sigma = std::sqrt(d.variance());
  const double iqr = d.quantile(0.75) - d.quantile(0.25);
  double spread = sigma;
  if (iqr > 0.0) spread = std::min(spread > 0.0 ? spread : iqr / 1.34, iqr / 1.34);
  double neff = 0.0;
  for (double p : d.probs) neff += p * p;
  neff = 1.0 / neff;
  double h = 0.9 * spread * std::pow(neff, -0.2);
  const double floor = std::max(1e-3 * range, 1e-9);
  return std::max(h, floor);
}

double kl_kde_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  constexpr int kGrid = 512;
  const double lo_v = std::min(a.values.front(), b.values.front());
  const double hi_v = std::max(a.values.back(), b.values.back());
  const double range = std::max(hi_v - lo_v, 1e-9);
  const double ha = silverman_bandwidth(a, range);
  const double hb = silverman_bandwidth(b, range);
  const double pad = 4.0 * std::max(ha, hb);
  const double lo = lo_v - pad;
  const double hi = hi_v + pad;
  const double dx = (hi - lo) / (kGrid - 1);

  auto density = [&](const EmpiricalDistribution& d, double h, std::vector<double>& out) {
    out.assign(kGrid, 0.0);
    for (int k = 0; k < kGrid; ++k) {
      const double x = lo + dx * k;
      double acc = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        acc += d.probs[i] * normal_pdf((x - d.values[i]) / h);
      }
      out[k] = acc / h;
    }
    double mass = 0.0;
    for (double v : out) mass += v * dx;
    for (double& v : out) v = std::max(v / mass, 1e-12);
  };

  std::vector<double> pa, pb;
  density(a, ha, pa);
  density(b, hb, pb);
  double kl = 0.0;
  for (int k = 0; k < kGrid; ++k) kl += pa[k] * std::log(pa[k] / pb[k]) * dx;
  return kl;
}

}  // namespace

double distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b, Metric metric) {
  if (a.size() == 0 || b.size() == 0) throw DomainError("distance: empty distribution");
  switch (metric) {
    case Metric::Cramer:
      return cramer_distance(a, b);
    case Metric::Wasserstein:
      return wasserstein_distance(a, b);
    case Metric::Kl:
      return kl_kde_distance(a, b);
  }
  return 0.0;
}

EmpiricalDistribution mc_return_distribution(GridWorld& env, std::span<const int> policy,
                                             GridCell s, int a, int n_rollouts, double gamma,
                                             Rng& rng) {
  if (n_rollouts < 1) throw DomainError("mc_return_distribution: n_rollouts must be >= 1");
  if (static_cast<int>(policy.size()) != env.state_count()) {
    throw DimensionError("mc_return_distribution: policy size mismatch");
  }
  std::vector<double> samples;
  samples.reserve(n_rollouts);
  int truncations = 0;
  for (int i = 0; i < n_rollouts; ++i) {
    env.set_cell(s);
    double ret = 0.0;
    double disc = 1.0;
    int act = a;
    while (true) {
      const StepResult res = env.step(act, rng);
      ret += disc * res.reward;
      disc *= gamma;
      if (res.terminal) break;
      if (res.truncated) {
        ++truncations;
        break;
      }
      act = policy[*env.state_id()];
    }
    samples.push_back(ret);
  }
  if (truncations > 0) {
    std::cerr << "warning: mc_return_distribution truncated " << truncations << " of "
              << n_rollouts << " rollouts at the step cap\n";
  }
  return EmpiricalDistribution::from_samples(std::move(samples));
}

GridWorldPlan optimal_policy_gridworld(const GridWorldConfig& config, double gamma, double tol) {
  config.validate();
  constexpr int kCells = GridWorld::kSize * GridWorld::kSize;
  const auto is_terminal = [&](GridCell c) { return c == config.target || c == config.trap; };
  const auto mu = [&](GridCell c) {
    if (c == config.target) return 1.0;
    if (c == config.trap) return -1.0;
    return 0.0;
  };
  const double p2 = config.double_move_prob;

  GridWorldPlan plan;
  plan.values.assign(kCells, 0.0);
  std::vector<double> next(kCells, 0.0);

  const auto action_value = [&](const std::vector<double>& v, GridCell c, int a) {
    double q = 0.0;
    for (const auto& [dist, p] : {std::pair{1, 1.0 - p2}, std::pair{2, p2}}) {
      const GridCell land = GridWorld::displace(c, a, dist);
      q += p * (mu(land) + (is_terminal(land) ? 0.0 : gamma * v[GridWorld::cell_index(land)]));
    }
    return q;
  };

  for (int sweep = 0; sweep < 100000; ++sweep) {
    double delta = 0.0;
    for (int idx = 0; idx < kCells; ++idx) {
      const GridCell c = GridWorld::cell_from_index(idx);
      if (is_terminal(c)) {
        next[idx] = 0.0;
        continue;
      }
      double best = -1e300;
      for (int a = 0; a < 4; ++a) best = std::max(best, action_value(plan.values, c, a));
      delta = std::max(delta, std::abs(best - plan.values[idx]));
      next[idx] = best;
    }
    plan.values = next;
    plan.sweeps = sweep + 1;
    if (delta < tol) break;
  }

  plan.policy.assign(kCells, 0);
  for (int idx = 0; idx < kCells; ++idx) {
    const GridCell c = GridWorld::cell_from_index(idx);
    if (is_terminal(c)) continue;
    double best = -1e300;
    int best_a = 0;
    for (int a = 0; a < 4; ++a) {
      const double q = action_value(plan.values, c, a);
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    plan.policy[idx] = best_a;
  }
  return plan;
}

ContractionProbeResult contraction_probe(const DiscreteMdp& mdp, Metric metric, int trials,
                                         Rng& rng) {
  if (trials < 1) throw DomainError("contraction_probe: trials must be >= 1");
  ContractionProbeResult result;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<int> policy(mdp.n_states);
    for (int& a : policy) a = rng.uniform_int(mdp.n_actions);
    const AtomTable z1 = random_atom_table(mdp, 4, 1.0, rng);
    const AtomTable z2 = random_atom_table(mdp, 4, 1.0, rng);

    const auto sup = [&](const AtomTable& x, const AtomTable& y) {
      double d = 0.0;
      for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) d = std::max(d, distance(x[s][a], y[s][a], metric));
      }
      return d;
    };

    const double before = sup(z1, z2);
    if (before < 1e-9) continue;
    const AtomTable t1 = exact_operator(mdp, z1, policy);
    const AtomTable t2 = exact_operator(mdp, z2, policy);
    const double after = sup(t1, t2);
    const double ratio = after / before;
    result.ratios.push_back(ratio);
    result.max_ratio = std::max(result.max_ratio, ratio);
    ++result.valid_trials;
  }
  return result;
}

DiscreteMdp random_mdp(int n_states, int n_actions, int max_reward_atoms, double gamma,
                       double terminal_prob, Rng& rng) {
  DiscreteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.terminal.resize(n_states);
  for (int s = 0; s < n_states; ++s) {
    mdp.terminal[s] = rng.uniform() < terminal_prob;
  }
  mdp.transitions.assign(n_states, {});
  mdp.rewards.assign(n_states, {});
  for (int s = 0; s < n_states; ++s) {
    mdp.transitions[s].resize(n_actions);
    mdp.rewards[s].resize(n_actions);
    for (int a = 0; a < n_actions; ++a) {
      const int support = 1 + rng.uniform_int(std::min(3, n_states));
      std::vector<int> order(n_states);
      std::iota(order.begin(), order.end(), 0);
      for (int k = 0; k < support; ++k) {
        const int j = k + rng.uniform_int(n_states - k);
        std::swap(order[k], order[j]);
      }
      double total = 0.0;
      std::vector<std::pair<int, double>> row;
      for (int k = 0; k < support; ++k) {
        const double w = rng.uniform(0.1, 1.0);
        row.emplace_back(order[k], w);
        total += w;
      }
      for (auto& [sn, p] : row) p /= total;
      mdp.transitions[s][a] = std::move(row);

      const int n_atoms = 1 + rng.uniform_int(max_reward_atoms);
      std::vector<RewardAtom> atoms(n_atoms);
      total = 0.0;
      for (RewardAtom& ra : atoms) {
        ra.value = rng.uniform(-1.0, 1.0);
        ra.prob = rng.uniform(0.1, 1.0);
        total += ra.prob;
      }
      for (RewardAtom& ra : atoms) ra.prob /= total;
      mdp.rewards[s][a] = std::move(atoms);
    }
  }
  mdp.validate();
  return mdp;
}

EmpiricalDistribution view_atoms(const ReturnDistributionView& view,
                                 std::span<const double> features, int n) {
  if (n < 2) throw DomainError("view_atoms: need at least 2 cells");
  const UmnnModel& model = *view.model;
  Conditioning cond = condition(model, features);

  if (view.rep == Representation::Qf) {
    std::vector<double> taus(n);
    for (int k = 0; k < n; ++k) taus[k] = (k + 0.5) / n;
    const UmnnEval ev = umnn_eval(model, cond, taus, false);
    return EmpiricalDistribution::from_atoms(ev.G, std::vector<double>(n, 1.0 / n));
  }

  std::vector<double> zs(n + 1);
  const double h = view.domain.width() / n;
  for (int k = 0; k <= n; ++k) zs[k] = view.domain.z_min + h * k;
  const ViewEval ve = view_eval(view.rep, model, cond, zs);

  std::vector<double> values(n), probs(n);
  if (view.rep == Representation::Cdf) {
    for (int k = 0; k < n; ++k) {
      values[k] = 0.5 * (zs[k] + zs[k + 1]);
      probs[k] = std::max(ve.values[k + 1] - ve.values[k], 0.0);
    }
    // Tail mass outside the domain collapses onto the boundary cells.
    probs.front() += ve.values.front();
    probs.back() += 1.0 - ve.values.back();
  } else {
    for (int k = 0; k < n; ++k) {
      values[k] = 0.5 * (zs[k] + zs[k + 1]);
      probs[k] = 0.5 * (ve.values[k] + ve.values[k + 1]) * h;
    }
    double mass = 0.0;
    for (double p : probs) mass += p;
    if (mass <= 0.0) throw NumericError("view_atoms: zero density mass over the domain");
    for (double& p : probs) p /= mass;
  }
  // Cells with zero mass are dropped by the atom constructor.
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  return EmpiricalDistribution::from_atoms(std::move(values), std::move(probs));
}

double cramer_vs_empirical(const ReturnDistributionView& view, std::span<const double> features,
                           const EmpiricalDistribution& d, int grid_points) {
  if (view.rep != Representation::Cdf) {
    throw DomainError("cramer_vs_empirical: view must be a CDF");
  }
  const double lo = std::min(view.domain.z_min, d.values.front());
  const double hi = std::max(view.domain.z_max, d.values.back());
  const double h = (hi - lo) / (grid_points - 1);
  std::vector<double> zs(grid_points);
  for (int k = 0; k < grid_points; ++k) zs[k] = lo + h * k;

  Conditioning cond = condition(*view.model, features);
  const ViewEval ve = view_eval(Representation::Cdf, *view.model, cond, zs);

  double integral = 0.0;
  std::size_t ai = 0;
  double fa = 0.0;
  for (int k = 0; k + 1 < grid_points; ++k) {
    while (ai < d.size() && d.values[ai] <= zs[k]) fa += d.probs[ai++];
    const double diff = ve.values[k] - fa;
    integral += h * diff * diff;
  }
  return std::sqrt(integral);
}

AtomTable random_atom_table(const DiscreteMdp& mdp, int max_atoms, double value_scale, Rng& rng) {
  AtomTable z(mdp.n_states, std::vector<EmpiricalDistribution>(mdp.n_actions));
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int n = 1 + rng.uniform_int(max_atoms);
      std::vector<double> values(n), probs(n);
      double total = 0.0;
      for (int k = 0; k < n; ++k) {
        values[k] = rng.uniform(-value_scale, value_scale);
        probs[k] = rng.uniform(0.05, 1.0);
        total += probs[k];
      }
      for (double& p : probs) p /= total;
      z[s][a] = EmpiricalDistribution::from_atoms(std::move(values), std::move(probs));
    }
  }
  return z;
}

}  // namespace umdqn
