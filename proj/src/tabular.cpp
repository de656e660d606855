#include "irl/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace irl {

TabularMdp::TabularMdp(std::size_t states, std::size_t actions,
                       std::vector<std::vector<Transition>> successors,
                       Eigen::VectorXd initial, Eigen::VectorXd reward,
                       double gamma, std::size_t horizon)
    : states_(states),
      actions_(actions),
      successors_(std::move(successors)),
      initial_(std::move(initial)),
      reward_(std::move(reward)),
      gamma_(gamma),
      horizon_(horizon) {
  if (states_ == 0 || actions_ == 0)
    throw Error(Errc::invalid_argument, "tabular mdp needs states and actions");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0))
    throw Error(Errc::invalid_argument, "discount must lie in [0, 1)");
  if (successors_.size() != states_ * actions_)
    throw Error(Errc::invalid_argument, "need one successor list per (state, action)");
  if (static_cast<std::size_t>(initial_.size()) != states_ ||
      static_cast<std::size_t>(reward_.size()) != states_)
    throw Error(Errc::invalid_argument, "initial distribution / reward size mismatch");
  for (std::size_t i = 0; i < successors_.size(); ++i) {
    double sum = 0.0;
    for (const auto& tr : successors_[i]) {
      if (tr.next >= states_ || tr.probability < 0.0)
        throw Error(Errc::invalid_argument,
                    "invalid transition from row " + std::to_string(i));
      sum += tr.probability;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error(Errc::invalid_argument,
                  "transition row " + std::to_string(i) + " does not sum to 1");
  }
  if (std::abs(initial_.sum() - 1.0) > 1e-12 || initial_.minCoeff() < 0.0)
    throw Error(Errc::invalid_argument, "initial distribution must be a distribution");
}

TabularMdp TabularMdp::with_reward(Eigen::VectorXd reward) const {
  TabularMdp copy = *this;
  if (static_cast<std::size_t>(reward.size()) != states_)
    throw Error(Errc::invalid_argument, "reward size mismatch");
  copy.reward_ = std::move(reward);
  return copy;
}

TabularMdp TabularMdp::with_horizon(std::size_t horizon) const {
  TabularMdp copy = *this;
  copy.horizon_ = horizon;
  return copy;
}

namespace {

StateIndex draw(std::span<const Transition> row, Rng& rng) {
  double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& tr : row) {
    acc += tr.probability;
    if (u < acc) return tr.next;
  }
  for (std::size_t i = row.size(); i-- > 0;)
    if (row[i].probability > 0.0) return row[i].next;
  return row.front().next;
}

}  // namespace

DiscountedMdp<StateIndex> TabularMdp::generative() const {
  if (!bounded())
    throw Error(Errc::invalid_argument, "generative view requires a finite horizon");
  auto self = std::make_shared<const TabularMdp>(*this);
  DiscountedMdp<StateIndex> g;
  g.num_actions = actions_;
  g.gamma = gamma_;
  g.horizon = horizon_;
  g.initial = [self](Rng& rng) {
    double u = uniform01(rng);
    double acc = 0.0;
    const auto& d = self->initial();
    for (Eigen::Index s = 0; s < d.size(); ++s) {
      acc += d[s];
      if (u < acc) return static_cast<StateIndex>(s);
    }
    for (Eigen::Index s = d.size(); s-- > 0;)
      if (d[s] > 0.0) return static_cast<StateIndex>(s);
    return StateIndex{0};
  };
  g.transition = [self](const StateIndex& s, ActionIndex a, Rng& rng) {
    return draw(self->successors(s, a), rng);
  };
  g.reward = [self](const StateIndex& s) { return self->reward()[static_cast<Eigen::Index>(s)]; };
  g.valid = [n = states_](const StateIndex& s) { return s < n; };
  return g;
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probabilities)
    : probs_(std::move(probabilities)) {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (std::abs(probs_.row(s).sum() - 1.0) > 1e-12 || probs_.row(s).minCoeff() < 0.0)
      throw Error(Errc::invalid_argument,
                  "policy row " + std::to_string(s) + " is not a distribution");
  }
}

TabularPolicy TabularPolicy::deterministic(std::span<const ActionIndex> actions,
                                           std::size_t num_actions) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()),
                                            static_cast<Eigen::Index>(num_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= num_actions)
      throw Error(Errc::invalid_argument, "action index out of range");
    p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
  }
  return TabularPolicy(std::move(p));
}

TabularPolicy TabularPolicy::uniform(std::size_t states, std::size_t actions) {
  return TabularPolicy(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(states),
                                                 static_cast<Eigen::Index>(actions),
                                                 1.0 / static_cast<double>(actions)));
}

void TabularPolicy::probabilities(const StateIndex& s, std::span<double> out) const {
  for (Eigen::Index a = 0; a < probs_.cols(); ++a)
    out[static_cast<std::size_t>(a)] = probs_(static_cast<Eigen::Index>(s), a);
}

ActionIndex TabularPolicy::sample(const StateIndex& s, Rng& rng) const {
  const auto row = static_cast<Eigen::Index>(s);
  double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
    acc += probs_(row, a);
    if (u < acc) return static_cast<ActionIndex>(a);
  }
  for (Eigen::Index a = probs_.cols(); a-- > 0;)
    if (probs_(row, a) > 0.0) return static_cast<ActionIndex>(a);
  return 0;
}

std::vector<ActionIndex> TabularPolicy::actions() const {
  std::vector<ActionIndex> out(static_cast<std::size_t>(probs_.rows()));
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < probs_.cols(); ++a)
      if (probs_(s, a) > probs_(s, best)) best = a;
    out[static_cast<std::size_t>(s)] = static_cast<ActionIndex>(best);
  }
  return out;
}

namespace {

double expected_next(const TabularMdp& mdp, StateIndex s, ActionIndex a,
                     const Eigen::VectorXd& v) {
  double acc = 0.0;
  for (const auto& tr : mdp.successors(s, a))
    acc += tr.probability * v[static_cast<Eigen::Index>(tr.next)];
  return acc;
}

// One Bellman optimality backup; ties keep the lowest action index.
Eigen::VectorXd backup(const TabularMdp& mdp, const Eigen::VectorXd& v,
                       std::vector<ActionIndex>& greedy) {
  const std::size_t n = mdp.num_states();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  greedy.assign(n, 0);
  for (StateIndex s = 0; s < n; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
      double q = expected_next(mdp, s, a, v);
      if (q > best) {
        best = q;
        greedy[s] = a;
      }
    }
    out[static_cast<Eigen::Index>(s)] = mdp.reward()[static_cast<Eigen::Index>(s)] + mdp.gamma() * best;
  }
  return out;
}

Eigen::VectorXd policy_backup(const TabularMdp& mdp, const TabularPolicy& pi,
                              const Eigen::VectorXd& v) {
  const std::size_t n = mdp.num_states();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (StateIndex s = 0; s < n; ++s) {
    double acc = 0.0;
    for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
      double p = pi.matrix()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (p != 0.0) acc += p * expected_next(mdp, s, a, v);
    }
    out[static_cast<Eigen::Index>(s)] = mdp.reward()[static_cast<Eigen::Index>(s)] + mdp.gamma() * acc;
  }
  return out;
}

void check_policy(const TabularMdp& mdp, const TabularPolicy& pi) {
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions())
    throw Error(Errc::invalid_argument, "policy shape does not match mdp");
}

}  // namespace

TabularSolution value_iteration(const TabularMdp& mdp) {
  std::vector<ActionIndex> greedy;
  Eigen::VectorXd v;
  if (mdp.bounded()) {
    // V_1 = R; V_k = R + gamma max_a P_a V_(k-1). The decision taken with
    // k ticks to go comes from the backup producing V_k.
    v = mdp.reward();
    greedy.assign(mdp.num_states(), 0);
    for (std::size_t k = 2; k <= mdp.horizon(); ++k) v = backup(mdp, v, greedy);
  } else {
    v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states()));
    for (std::size_t iter = 0; iter < 1000000; ++iter) {
      Eigen::VectorXd next = backup(mdp, v, greedy);
      double residual = (next - v).lpNorm<Eigen::Infinity>();
      v = std::move(next);
      if (residual <= 1e-10) break;
    }
    // Extract the greedy policy from the converged values.
    backup(mdp, v, greedy);
  }
  return {TabularPolicy::deterministic(greedy, mdp.num_actions()), std::move(v)};
}

TabularPolicy optimal_uniform_ties(const TabularMdp& mdp, double tolerance) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  const auto m = static_cast<Eigen::Index>(mdp.num_actions());
  // Values with one tick fewer to go; with a single tick no action matters.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  if (!mdp.bounded()) v = value_iteration(mdp).values;
  else if (mdp.horizon() > 1) v = value_iteration(mdp.with_horizon(mdp.horizon() - 1)).values;
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, m);
  std::vector<double> q(mdp.num_actions());
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    for (ActionIndex a = 0; a < mdp.num_actions(); ++a) q[a] = expected_next(mdp, s, a, v);
    const double best = *std::max_element(q.begin(), q.end());
    const double slack = tolerance * std::max(1.0, std::abs(best));
    std::vector<ActionIndex> ties;
    for (ActionIndex a = 0; a < mdp.num_actions(); ++a)
      if (q[a] >= best - slack) ties.push_back(a);
    for (ActionIndex a : ties)
      probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = 1.0 / static_cast<double>(ties.size());
  }
  return TabularPolicy(std::move(probs));
}

Eigen::VectorXd evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_policy(mdp, policy);
  if (mdp.bounded()) {
    Eigen::VectorXd v = mdp.reward();
    for (std::size_t k = 2; k <= mdp.horizon(); ++k) v = policy_backup(mdp, policy, v);
    return v;
  }
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (StateIndex s = 0; s < mdp.num_states(); ++s)
    for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
      double pa = policy.matrix()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      for (const auto& tr : mdp.successors(s, a))
        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(tr.next)) += pa * tr.probability;
    }
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * p;
  return lhs.partialPivLu().solve(mdp.reward());
}

double expected_value(const TabularMdp& mdp, const TabularPolicy& policy) {
  return mdp.initial().dot(evaluate_policy(mdp, policy));
}

Eigen::VectorXd state_occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_policy(mdp, policy);
  if (!mdp.bounded())
    throw Error(Errc::invalid_argument, "occupancy requires a finite horizon");
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::VectorXd dist = mdp.initial();
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(n);
  double discount = 1.0;
  for (std::size_t t = 1; t <= mdp.horizon(); ++t) {
    occ += discount * dist;
    if (t == mdp.horizon()) break;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
    for (StateIndex s = 0; s < mdp.num_states(); ++s) {
      double ps = dist[static_cast<Eigen::Index>(s)];
      if (ps == 0.0) continue;
      for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
        double pa = policy.matrix()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
        if (pa == 0.0) continue;
        for (const auto& tr : mdp.successors(s, a))
          next[static_cast<Eigen::Index>(tr.next)] += ps * pa * tr.probability;
      }
    }
    dist = std::move(next);
    discount *= mdp.gamma();
  }
  return occ;
}

Eigen::VectorXd visitation_expectation(const TabularMdp& mdp,
                                       const TabularPolicy& policy,
                                       std::span<const std::size_t> feature_index,
                                       std::size_t num_features) {
  if (feature_index.size() != mdp.num_states())
    throw Error(Errc::invalid_argument, "need one feature index per state");
  Eigen::VectorXd occ = state_occupancy(mdp, policy);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features));
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    if (feature_index[s] >= num_features)
      throw Error(Errc::invalid_argument, "feature index out of range");
    mu[static_cast<Eigen::Index>(feature_index[s])] += occ[static_cast<Eigen::Index>(s)];
  }
  return mu;
}

namespace {

Eigen::VectorXd random_distribution(std::size_t n, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = -std::log(1.0 - uniform01(rng));  // exponential draws
  return v / v.sum();
}

}  // namespace

TabularMdp random_tabular_mdp(std::size_t states, std::size_t actions, double gamma,
                              std::size_t horizon, Rng& rng) {
  std::vector<std::vector<Transition>> succ(states * actions);
  for (auto& row : succ) {
    Eigen::VectorXd p = random_distribution(states, rng);
    double sum = 0.0;
    for (std::size_t s = 0; s + 1 < states; ++s) {
      row.push_back({s, p[static_cast<Eigen::Index>(s)]});
      sum += p[static_cast<Eigen::Index>(s)];
    }
    row.push_back({states - 1, std::max(0.0, 1.0 - sum)});
  }
  Eigen::VectorXd d = random_distribution(states, rng);
  d[static_cast<Eigen::Index>(states - 1)] =
      std::max(0.0, 1.0 - d.head(static_cast<Eigen::Index>(states - 1)).sum());
  Eigen::VectorXd r(static_cast<Eigen::Index>(states));
  for (auto& x : r) x = uniform01(rng);
  return TabularMdp(states, actions, std::move(succ), std::move(d), std::move(r),
                    gamma, horizon);
}

TabularPolicy random_stochastic_policy(std::size_t states, std::size_t actions, Rng& rng) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions));
  for (std::size_t s = 0; s < states; ++s) {
    Eigen::VectorXd row = random_distribution(actions, rng);
    row[static_cast<Eigen::Index>(actions - 1)] =
        std::max(0.0, 1.0 - row.head(static_cast<Eigen::Index>(actions - 1)).sum());
    p.row(static_cast<Eigen::Index>(s)) = row.transpose();
  }
  return TabularPolicy(std::move(p));
}

}  // namespace irl
