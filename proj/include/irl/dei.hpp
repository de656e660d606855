#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "irl/kpirl.hpp"
#include "irl/mdp.hpp"

namespace irl {

/// v_w = (1/W) sum_{t<W} rewards[w+t] for w = 0 .. size-W.
std::vector<double> windowed_returns(std::span<const double> rewards, std::size_t window);

enum class StepsizeRule { sample_average, harmonic };

struct StepsizeSpec {
  StepsizeRule rule = StepsizeRule::harmonic;
  double harmonic_a = 10.0;

  /// Weight given to the n-th observation (n >= 1). Both rules give 1 at n = 1.
  double weight(std::size_t n) const {
    if (rule == StepsizeRule::sample_average) return 1.0 / static_cast<double>(n);
    return harmonic_a / (harmonic_a + static_cast<double>(n) - 1.0);
  }
};

struct Observation {
  std::uint64_t key = 0;
  ActionIndex action = 0;
  double value = 0.0;
};

/// Discretized-key table. Repeat observations are smoothed by the stepsize
/// rule; the variance is the plain sample variance of what was fed in.
class QEstimate {
 public:
  struct Cell {
    double mean = 0.0;
    double welford_mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;
  };

  explicit QEstimate(StepsizeSpec stepsize = {}) : stepsize_(stepsize) {}

  void add(std::uint64_t key, double value);

  /// Mean at key, or the global mean of every observation when unseen.
  double value(std::uint64_t key) const;
  std::size_t count(std::uint64_t key) const;
  /// Sample standard deviation; 0 with fewer than two observations.
  double stddev(std::uint64_t key) const;

  double global_mean() const { return total_count_ ? total_ / static_cast<double>(total_count_) : 0.0; }
  std::size_t keys() const { return cells_.size(); }
  std::size_t observations() const { return total_count_; }
  const StepsizeSpec& stepsize() const { return stepsize_; }
  /// Every visited key in ascending order.
  std::vector<std::pair<std::uint64_t, Cell>> cells() const;

 private:
  StepsizeSpec stepsize_;
  std::unordered_map<std::uint64_t, Cell> cells_;
  double total_ = 0.0;
  std::size_t total_count_ = 0;
};

/// Observations are applied in order; the stepsize rules are order dependent.
QEstimate fit_q(std::span<const Observation> observations, StepsizeSpec stepsize = {});

/// Lowest index among the maxima.
ActionIndex argmax_lowest(std::span<const double> values);

/// argmax of mean + c * std / sqrt(count); count 0 ranks first.
ActionIndex ucb_initial_action(std::span<const double> means, std::span<const double> stds,
                               std::span<const std::size_t> counts, double c);

/// The domain handed to DEI: an MDP plus the key its Q function is indexed
/// by. Tabular models use s * |A| + a; the game uses a post-decision key.
template <class State>
struct DeiModel {
  DiscountedMdp<State> mdp;
  std::function<std::uint64_t(const State&, ActionIndex)> q_key;
  /// Absorbing states with zero reward. Simulation stops there and the
  /// remaining window samples are zeros, which cost no interactions.
  std::function<bool(const State&)> terminal;
};

template <class State>
DeiModel<State> tabular_dei_model(DiscountedMdp<State> mdp) {
  const auto actions = mdp.num_actions;
  DeiModel<State> model;
  model.mdp = std::move(mdp);
  model.q_key = [actions](const State& s, ActionIndex a) {
    return static_cast<std::uint64_t>(s) * actions + a;
  };
  return model;
}

struct DeiConfig {
  std::size_t iterations = 30;  // I
  std::size_t episodes = 25;    // M
  std::size_t steps = 20;       // T
  std::size_t window = 8;       // W
  std::size_t budget = 15000;
  StepsizeSpec stepsize;
  /// UCB coefficient for a0; uniform-random a0 when empty.
  std::optional<double> ucb;

  void validate() const;
};

/// Deterministic greedy policy over a fitted Q.
template <class State>
class GreedyQPolicy final : public StationaryPolicy<State> {
 public:
  GreedyQPolicy(std::shared_ptr<const QEstimate> q,
                std::function<std::uint64_t(const State&, ActionIndex)> key,
                std::size_t actions)
      : q_(std::move(q)), key_(std::move(key)), actions_(actions) {}

  std::size_t num_actions() const override { return actions_; }

  ActionIndex choose(const State& s) const {
    ActionIndex best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (ActionIndex a = 0; a < actions_; ++a) {
      double v = q_->value(key_(s, a));
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    return best;
  }

  void probabilities(const State& s, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[choose(s)] = 1.0;
  }
  ActionIndex sample(const State& s, Rng&) const override { return choose(s); }

  const QEstimate& q() const { return *q_; }

 private:
  std::shared_ptr<const QEstimate> q_;
  std::function<std::uint64_t(const State&, ActionIndex)> key_;
  std::size_t actions_;
};

template <class State>
struct DeiResult {
  /// pi_(I+1); uniform random if no iteration completed.
  PolicyPtr<State> policy;
  std::shared_ptr<const QEstimate> q;
  bool truncated = false;
  std::size_t iterations_completed = 0;
  std::size_t steps_used = 0;
  std::size_t observations = 0;
  /// Mean discounted return of the episodes generated in each iteration.
  std::vector<double> iteration_returns;
};

namespace detail {

template <class State>
struct DeiEpisode {
  std::vector<Observation> observations;
  std::size_t steps = 0;
  double discounted = 0.0;
};

template <class State>
DeiEpisode<State> dei_episode(const DeiModel<State>& model, const DeiConfig& config,
                              const StationaryPolicy<State>& policy, const QEstimate* previous,
                              std::uint64_t seed) {
  const auto& mdp = model.mdp;
  Rng rng(seed);
  State s = mdp.initial(rng);
  std::vector<State> states;
  std::vector<ActionIndex> actions;
  std::vector<double> rewards;
  states.reserve(config.steps);
  DeiEpisode<State> ep;
  double discount = 1.0;
  for (std::size_t t = 0; t < config.steps; ++t) {
    if (model.terminal && model.terminal(s)) break;
    if (mdp.valid && !mdp.valid(s))
      throw Error(Errc::environment_fault, "dei: sampler produced an invalid state at tick " +
                                               std::to_string(t));
    ActionIndex a;
    if (t == 0) {
      if (config.ucb && previous) {
        std::vector<double> means(mdp.num_actions), stds(mdp.num_actions);
        std::vector<std::size_t> counts(mdp.num_actions);
        for (ActionIndex b = 0; b < mdp.num_actions; ++b) {
          auto key = model.q_key(s, b);
          means[b] = previous->value(key);
          stds[b] = previous->stddev(key);
          counts[b] = previous->count(key);
        }
        a = ucb_initial_action(means, stds, counts, *config.ucb);
      } else {
        a = uniform_index(rng, mdp.num_actions);
      }
    } else {
      a = policy.sample(s, rng);
    }
    double r = mdp.reward(s);
    ep.discounted += discount * r;
    discount *= mdp.gamma;
    states.push_back(s);
    actions.push_back(a);
    rewards.push_back(r);
    ++ep.steps;
    if (t + 1 < config.steps) s = mdp.transition(s, a, rng);
  }
  const std::size_t simulated = states.size();
  rewards.resize(config.steps, 0.0);
  auto v = windowed_returns(rewards, config.window);
  for (std::size_t w = 0; w < v.size() && w < simulated; ++w)
    ep.observations.push_back({model.q_key(states[w], actions[w]), actions[w], v[w]});
  return ep;
}

}  // namespace detail

/// Direct estimate iteration. Episodes inside an iteration run in parallel;
/// their observations are merged in episode order, so the result does not
/// depend on the thread count.
template <class State>
DeiResult<State> run_dei(const DeiModel<State>& model, const DeiConfig& config,
                         std::uint64_t seed) {
  config.validate();
  model.mdp.validate();
  if (!model.q_key) throw Error(Errc::invalid_argument, "dei model needs a q key");
  const std::size_t actions = model.mdp.num_actions;

  DeiResult<State> result;
  PolicyPtr<State> policy = std::make_shared<UniformRandomPolicy<State>>(actions);
  std::shared_ptr<const QEstimate> q;
  std::vector<Observation> observations;

  for (std::size_t i = 0; i < config.iterations; ++i) {
    const std::size_t remaining = config.budget - result.steps_used;
    const std::size_t affordable = std::min(config.episodes, remaining / config.steps);
    if (affordable < config.episodes) result.truncated = true;
    if (affordable == 0) break;

    std::vector<detail::DeiEpisode<State>> episodes(affordable);
    const auto n = static_cast<std::int64_t>(affordable);
    const QEstimate* prev = q.get();
    const auto& pol = *policy;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t m = 0; m < n; ++m)
      episodes[static_cast<std::size_t>(m)] = detail::dei_episode(
          model, config, pol, prev, derive_seed(seed, i, static_cast<std::uint64_t>(m)));

    double total = 0.0;
    for (auto& ep : episodes) {
      result.steps_used += ep.steps;
      total += ep.discounted;
      observations.insert(observations.end(), ep.observations.begin(), ep.observations.end());
    }
    result.iteration_returns.push_back(total / static_cast<double>(affordable));

    q = std::make_shared<const QEstimate>(fit_q(observations, config.stepsize));
    policy = std::make_shared<GreedyQPolicy<State>>(q, model.q_key, actions);
    ++result.iterations_completed;
    if (result.truncated) break;
  }
  result.policy = policy;
  result.q = q;
  result.observations = observations.size();
  return result;
}

/// Deterministic table of a policy's choices over states 0..S-1.
TabularPolicy tabularize(const StationaryPolicy<StateIndex>& policy, std::size_t states);

/// KPIRL inner solver backed by DEI plus Monte Carlo visitation estimates.
template <class State>
class DeiKpirlSolver final : public RlSolver {
 public:
  DeiKpirlSolver(DeiModel<State> model, std::function<std::size_t(const State&)> feature_index,
                 std::size_t num_features, DeiConfig config, std::size_t eval_episodes,
                 std::uint64_t seed)
      : model_(std::move(model)),
        feature_index_(std::move(feature_index)),
        num_features_(num_features),
        config_(config),
        eval_episodes_(eval_episodes),
        seed_(seed) {
    if (eval_episodes_ < 1) throw Error(Errc::invalid_argument, "eval episodes must be >= 1");
  }

  PolicyOutcome solve(const KernelReward& reward) override {
    if (reward.size() != num_features_)
      throw Error(Errc::invalid_argument, "reward dimension does not match feature space");
    const std::size_t id = policies_.size();
    DeiModel<State> model = model_;
    auto values = std::make_shared<Eigen::VectorXd>(reward.values());
    auto index = feature_index_;
    model.mdp.reward = [values, index](const State& s) {
      return (*values)[static_cast<Eigen::Index>(index(s))];
    };
    auto result = run_dei(model, config_, derive_seed(seed_, id, 2));
    auto trajs = sample_trajectories(model_.mdp, *result.policy, eval_episodes_,
                                     derive_seed(seed_, id, 3));
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features_));
    for (const auto& traj : trajs) {
      double discount = 1.0;
      for (const auto& s : traj.states) {
        mu[static_cast<Eigen::Index>(feature_index_(s))] += discount;
        discount *= model_.mdp.gamma;
      }
    }
    mu /= static_cast<double>(eval_episodes_);
    policies_.push_back(result.policy);
    return {id, std::move(mu)};
  }

  const std::vector<PolicyPtr<State>>& policies() const { return policies_; }

 private:
  DeiModel<State> model_;
  std::function<std::size_t(const State&)> feature_index_;
  std::size_t num_features_;
  DeiConfig config_;
  std::size_t eval_episodes_;
  std::uint64_t seed_;
  std::vector<PolicyPtr<State>> policies_;
};

}  // namespace irl
