#pragma once

#include <span>
#include <vector>

#include "umdqn/distrib.hpp"
#include "umdqn/env.hpp"
#include "umdqn/rng.hpp"

namespace umdqn {

/// Finite weighted atom list (value, probability): the oracle-side ground
/// truth representation. Values sorted ascending, probabilities positive
/// and summing to 1 within 1e-12.
struct EmpiricalDistribution {
  std::vector<double> values;
  std::vector<double> probs;

  static EmpiricalDistribution from_samples(std::vector<double> samples);
  static EmpiricalDistribution from_atoms(std::vector<double> values, std::vector<double> probs,
                                          double merge_tol = 1e-12);

  std::size_t size() const { return values.size(); }
  double mean() const;
  double variance() const;
  /// Lowest value v with F(v) >= tau.
  double quantile(double tau) const;
  /// Step CDF evaluated at z.
  double cdf(double z) const;
};

struct RewardAtom {
  double value = 0.0;
  double prob = 1.0;
};

/// Small discrete MDP with finite reward support per (s, a); the substrate
/// for exact distributional operator computations.
struct DiscreteMdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.5;
  // transitions[s][a]: list of (next state, probability), rows sum to 1.
  std::vector<std::vector<std::vector<std::pair<int, double>>>> transitions;
  // rewards[s][a]: finite atom support, probabilities sum to 1.
  std::vector<std::vector<std::vector<RewardAtom>>> rewards;
  std::vector<bool> terminal;

  void validate() const;
};

using AtomTable = std::vector<std::vector<EmpiricalDistribution>>;  // [state][action]

inline constexpr std::size_t kAtomCap = 1000000;

/// Exact distributional Bellman operator on atom distributions: for each
/// (s, a) the mixture over (r, s') of r + gamma * z' atoms; a terminal s'
/// contributes the atom r alone. Atoms merged within 1e-12; throws
/// ResourceError beyond the atom cap.
AtomTable exact_operator(const DiscreteMdp& mdp, const AtomTable& z, std::span<const int> policy,
                         std::size_t atom_cap = kAtomCap);

/// The QF-averaging approximation of the operator: the quantile function of
/// the output is the expectation over (r, s') of r + gamma * F^-1(tau).
/// Realised exactly on the union of the outcomes' quantile breakpoints, so
/// the first moment matches exact_operator to roundoff while higher moments
/// may differ.
AtomTable qf_approx_operator(const DiscreteMdp& mdp, const AtomTable& z,
                             std::span<const int> policy, std::size_t atom_cap = kAtomCap);

enum class Metric { Kl, Cramer, Wasserstein };

const char* metric_name(Metric m);

/// Distance between two atom distributions:
///   Cramer      sqrt of the exact piecewise-constant CDF difference integral
///   Wasserstein exact integral |F_A^-1 - F_B^-1| over [0, 1]
///   KL          Gaussian kernel densities (Silverman bandwidth) compared
///               on a shared 512-point grid; raw atom sets have no
///               well-defined KL
/// Throws DomainError on empty distributions.
double distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b, Metric metric);

/// Monte Carlo return distribution: n_rollouts episodes starting with
/// (s, a) then following the policy table; each rollout contributes one
/// discounted return sample. Rollouts beyond the step cap are truncated.
EmpiricalDistribution mc_return_distribution(GridWorld& env, std::span<const int> policy,
                                             GridCell s, int a, int n_rollouts, double gamma,
                                             Rng& rng);

struct GridWorldPlan {
  std::vector<int> policy;     // per cell index; terminal cells hold action 0
  std::vector<double> values;  // discounted state values
  int sweeps = 0;              // value-iteration sweeps until convergence
};

/// Exact expectation dynamic programming on the 49-state grid world using
/// the known reward means and the double-move transition kernel; greedy
/// policy with ties broken by the lowest action index.
GridWorldPlan optimal_policy_gridworld(const GridWorldConfig& config, double gamma,
                                       double tol = 1e-12);

struct ContractionProbeResult {
  double max_ratio = 0.0;
  int valid_trials = 0;
  std::vector<double> ratios;
};

/// Random pairs of atom tables pushed once through exact_operator; returns
/// the maximum observed ratio of supremal distances after/before.
ContractionProbeResult contraction_probe(const DiscreteMdp& mdp, Metric metric, int trials,
                                         Rng& rng);

/// Random MDP for the contraction probes: dense-ish transitions, up to
/// max_reward_atoms reward atoms per (s, a), no terminal states unless
/// terminal_prob > 0.
DiscreteMdp random_mdp(int n_states, int n_actions, int max_reward_atoms, double gamma,
                       double terminal_prob, Rng& rng);

/// Random atom table over the MDP's state-action space.
AtomTable random_atom_table(const DiscreteMdp& mdp, int max_atoms, double value_scale, Rng& rng);

/// Discretises a learnt view into an atom distribution (for the generic
/// oracle distances): QF via an even fraction grid, CDF via increments on a
/// fine value grid with the leftover tail mass on the boundary cells, PDF
/// via normalised density cells.
EmpiricalDistribution view_atoms(const ReturnDistributionView& view,
                                 std::span<const double> features, int n = 512);

/// Cramer distance between a view's continuous CDF and an empirical
/// distribution, by numerical integration on a fine grid spanning both
/// supports. Only defined for the CDF representation.
double cramer_vs_empirical(const ReturnDistributionView& view, std::span<const double> features,
                           const EmpiricalDistribution& d, int grid_points = 1024);

}  // namespace umdqn
