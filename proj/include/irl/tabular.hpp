#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "irl/mdp.hpp"

namespace irl {

struct Transition {
  StateIndex next = 0;
  double probability = 0.0;
};

/// Horizon value meaning "infinite-horizon discounted".
inline constexpr std::size_t kUnboundedHorizon = 0;

/// Explicit finite MDP with state rewards.
///
/// successors(s, a) lists the non-zero entries of p_(s,a)(.). Probabilities
/// per (s, a) must sum to 1 within 1e-12; this is checked on construction.
class TabularMdp {
 public:
  TabularMdp(std::size_t states, std::size_t actions,
             std::vector<std::vector<Transition>> successors,
             Eigen::VectorXd initial, Eigen::VectorXd reward, double gamma,
             std::size_t horizon);

  std::size_t num_states() const { return states_; }
  std::size_t num_actions() const { return actions_; }
  double gamma() const { return gamma_; }
  std::size_t horizon() const { return horizon_; }
  bool bounded() const { return horizon_ != kUnboundedHorizon; }
  const Eigen::VectorXd& initial() const { return initial_; }
  const Eigen::VectorXd& reward() const { return reward_; }

  std::span<const Transition> successors(StateIndex s, ActionIndex a) const {
    return successors_[s * actions_ + a];
  }

  TabularMdp with_reward(Eigen::VectorXd reward) const;
  TabularMdp with_horizon(std::size_t horizon) const;

  /// Sampling view of the same model, for rollouts and Monte Carlo checks.
  DiscountedMdp<StateIndex> generative() const;

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<std::vector<Transition>> successors_;
  Eigen::VectorXd initial_;
  Eigen::VectorXd reward_;
  double gamma_;
  std::size_t horizon_;
};

/// Row-stochastic |S| x |A| action distribution.
class TabularPolicy final : public StationaryPolicy<StateIndex> {
 public:
  explicit TabularPolicy(Eigen::MatrixXd probabilities);

  static TabularPolicy deterministic(std::span<const ActionIndex> actions,
                                     std::size_t num_actions);
  static TabularPolicy uniform(std::size_t states, std::size_t actions);

  std::size_t num_actions() const override {
    return static_cast<std::size_t>(probs_.cols());
  }
  std::size_t num_states() const { return static_cast<std::size_t>(probs_.rows()); }
  void probabilities(const StateIndex& s, std::span<double> out) const override;
  ActionIndex sample(const StateIndex& s, Rng& rng) const override;

  const Eigen::MatrixXd& matrix() const { return probs_; }
  /// Greedy action per state (lowest index on ties); meaningful for
  /// deterministic policies.
  std::vector<ActionIndex> actions() const;

 private:
  Eigen::MatrixXd probs_;
};

struct TabularSolution {
  TabularPolicy policy;
  /// Optimal values per state: horizon-T values under backward induction, or
  /// the infinite-horizon fixed point.
  Eigen::VectorXd values;
};

/// Exact optimal control. Finite horizons use backward induction over T
/// ticks and return the first-decision greedy policy; unbounded horizons
/// iterate to a 1e-10 sup-norm residual. Greedy ties go to the lowest action.
TabularSolution value_iteration(const TabularMdp& mdp);

/// Optimal first decision with ties kept: each state spreads its mass
/// uniformly over every action whose Q is within `tolerance` (relative to
/// max(1, |Q*|)) of the best. A constant reward gives the uniform policy.
TabularPolicy optimal_uniform_ties(const TabularMdp& mdp, double tolerance = 1e-12);

/// Exact per-state value of a stationary policy under the mdp's reward.
Eigen::VectorXd evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy);

/// d . V^pi
double expected_value(const TabularMdp& mdp, const TabularPolicy& policy);

/// Discounted state occupancy sum_t gamma^(t-1) Pr(X_t = s) under d.
Eigen::VectorXd state_occupancy(const TabularMdp& mdp, const TabularPolicy& policy);

/// Occupancy aggregated onto feature indices: the exact state-visitation
/// expectation when several states may share a feature vector.
Eigen::VectorXd visitation_expectation(const TabularMdp& mdp,
                                       const TabularPolicy& policy,
                                       std::span<const std::size_t> feature_index,
                                       std::size_t num_features);

/// Uniformly random finite MDP used by property tests and the acceptance
/// corpus: dense random transition rows, random initial distribution.
TabularMdp random_tabular_mdp(std::size_t states, std::size_t actions,
                              double gamma, std::size_t horizon, Rng& rng);

TabularPolicy random_stochastic_policy(std::size_t states, std::size_t actions,
                                       Rng& rng);

}  // namespace irl
