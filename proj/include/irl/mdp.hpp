#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "irl/common.hpp"

namespace irl {

/// Generative discounted MDP: every solver and environment talks through this.
///
/// Rewards are state rewards R: S -> R. The process is observed for
/// `horizon` ticks; an action is selected in every visited state, including
/// the last one, so trajectories always hold exactly `horizon` pairs.
template <class State>
struct DiscountedMdp {
  std::size_t num_actions = 0;
  std::function<State(Rng&)> initial;
  std::function<State(const State&, ActionIndex, Rng&)> transition;
  std::function<double(const State&)> reward;
  std::function<bool(const State&)> valid;
  double gamma = 0.9;
  std::size_t horizon = 1;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw Error(Errc::invalid_argument, "discount must lie in [0, 1)");
    if (num_actions == 0)
      throw Error(Errc::invalid_argument, "action set is empty");
    if (!initial || !transition || !reward)
      throw Error(Errc::invalid_argument, "mdp is missing a sampler or reward");
  }
};

/// Stationary policy: state -> distribution over actions.
template <class State>
class StationaryPolicy {
 public:
  virtual ~StationaryPolicy() = default;

  virtual std::size_t num_actions() const = 0;
  virtual void probabilities(const State& s, std::span<double> out) const = 0;

  virtual ActionIndex sample(const State& s, Rng& rng) const {
    std::vector<double> p(num_actions());
    probabilities(s, p);
    double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      acc += p[a];
      if (u < acc) return a;
    }
    for (std::size_t a = p.size(); a-- > 0;)
      if (p[a] > 0.0) return a;
    return 0;
  }
};

template <class State>
using PolicyPtr = std::shared_ptr<const StationaryPolicy<State>>;

template <class State>
class UniformRandomPolicy final : public StationaryPolicy<State> {
 public:
  explicit UniformRandomPolicy(std::size_t actions) : actions_(actions) {}

  std::size_t num_actions() const override { return actions_; }

  void probabilities(const State&, std::span<double> out) const override {
    for (auto& p : out) p = 1.0 / static_cast<double>(actions_);
  }

  ActionIndex sample(const State&, Rng& rng) const override {
    return uniform_index(rng, actions_);
  }

 private:
  std::size_t actions_;
};

/// Deterministic policy backed by a callable.
template <class State>
class FunctionPolicy final : public StationaryPolicy<State> {
 public:
  FunctionPolicy(std::size_t actions,
                 std::function<ActionIndex(const State&)> choose)
      : actions_(actions), choose_(std::move(choose)) {}

  std::size_t num_actions() const override { return actions_; }

  void probabilities(const State& s, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[choose_(s)] = 1.0;
  }

  ActionIndex sample(const State& s, Rng&) const override { return choose_(s); }

 private:
  std::size_t actions_;
  std::function<ActionIndex(const State&)> choose_;
};

/// Convex combination of stationary policies; one base policy is drawn per
/// episode and followed for the whole episode.
template <class State>
struct MixedPolicy {
  std::vector<PolicyPtr<State>> policies;
  std::vector<double> weights;

  void validate() const {
    if (policies.empty())
      throw Error(Errc::invalid_argument, "mixed policy has no base policies");
    if (policies.size() != weights.size())
      throw Error(Errc::invalid_argument, "one weight per base policy required");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw Error(Errc::invalid_argument, "negative mixture weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error(Errc::invalid_argument, "mixture weights must sum to 1");
  }
};

template <class State>
PolicyPtr<State> sample_mixed(const MixedPolicy<State>& mixed, std::uint64_t seed) {
  mixed.validate();
  Rng rng(seed);
  double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < mixed.policies.size(); ++i) {
    acc += mixed.weights[i];
    if (u < acc) return mixed.policies[i];
  }
  for (std::size_t i = mixed.policies.size(); i-- > 0;)
    if (mixed.weights[i] > 0.0) return mixed.policies[i];
  return mixed.policies.front();
}

enum class TrajectorySource { expert, simulated, human };

std::string_view to_string(TrajectorySource source);
TrajectorySource parse_trajectory_source(std::string_view text);

template <class State>
struct Trajectory {
  std::vector<State> states;
  std::vector<ActionIndex> actions;
  double tick_period = 1.0;
  std::uint64_t seed = 0;
  TrajectorySource source = TrajectorySource::simulated;

  std::size_t size() const { return states.size(); }
};

template <class State>
Trajectory<State> rollout_from(const DiscountedMdp<State>& mdp,
                               const StationaryPolicy<State>& policy,
                               State start, Rng& rng) {
  if (mdp.horizon < 1) throw Error(Errc::invalid_argument, "horizon must be >= 1");
  Trajectory<State> traj;
  traj.states.reserve(mdp.horizon);
  traj.actions.reserve(mdp.horizon);
  State s = std::move(start);
  for (std::size_t t = 0; t < mdp.horizon; ++t) {
    if (mdp.valid && !mdp.valid(s))
      throw Error(Errc::environment_fault,
                  "sampler produced an invalid state at tick " + std::to_string(t));
    ActionIndex a = policy.sample(s, rng);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    if (t + 1 < mdp.horizon) s = mdp.transition(traj.states.back(), a, rng);
  }
  return traj;
}

/// Exactly `horizon` (state, action) pairs; bit-reproducible for a fixed seed.
template <class State>
Trajectory<State> rollout(const DiscountedMdp<State>& mdp,
                          const StationaryPolicy<State>& policy,
                          std::uint64_t seed) {
  mdp.validate();
  Rng rng(seed);
  State start = mdp.initial(rng);
  auto traj = rollout_from(mdp, policy, std::move(start), rng);
  traj.seed = seed;
  return traj;
}

template <class State>
double discounted_return(const DiscountedMdp<State>& mdp,
                         const Trajectory<State>& traj) {
  double total = 0.0;
  double discount = 1.0;
  for (const auto& s : traj.states) {
    total += discount * mdp.reward(s);
    discount *= mdp.gamma;
  }
  return total;
}

struct ValueEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t episodes = 0;
};

ValueEstimate summarize_returns(std::span<const double> returns);

// --- Parallel kernels and their serial references -------------------------
//
// Episode m always uses the stream derive_seed(seed, m), so the parallel and
// serial paths produce bit-identical per-episode results; reductions happen
// serially in episode order.

template <class State>
std::vector<double> episode_returns_reference(const DiscountedMdp<State>& mdp,
                                              const StationaryPolicy<State>& policy,
                                              std::size_t episodes,
                                              std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(episodes);
  for (std::size_t m = 0; m < episodes; ++m)
    out.push_back(discounted_return(mdp, rollout(mdp, policy, derive_seed(seed, m))));
  return out;
}

template <class State>
std::vector<double> episode_returns(const DiscountedMdp<State>& mdp,
                                    const StationaryPolicy<State>& policy,
                                    std::size_t episodes, std::uint64_t seed) {
  mdp.validate();
  std::vector<double> out(episodes);
  const auto n = static_cast<std::int64_t>(episodes);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t m = 0; m < n; ++m) {
    auto traj = rollout(mdp, policy, derive_seed(seed, static_cast<std::uint64_t>(m)));
    out[static_cast<std::size_t>(m)] = discounted_return(mdp, traj);
  }
  return out;
}

template <class State>
ValueEstimate policy_value_mc(const DiscountedMdp<State>& mdp,
                              const StationaryPolicy<State>& policy,
                              std::size_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error(Errc::invalid_argument, "episodes must be >= 1");
  auto returns = episode_returns(mdp, policy, episodes, seed);
  return summarize_returns(returns);
}

template <class State>
std::vector<Trajectory<State>> sample_trajectories(const DiscountedMdp<State>& mdp,
                                                   const StationaryPolicy<State>& policy,
                                                   std::size_t count,
                                                   std::uint64_t seed) {
  mdp.validate();
  std::vector<Trajectory<State>> out(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t m = 0; m < n; ++m)
    out[static_cast<std::size_t>(m)] =
        rollout(mdp, policy, derive_seed(seed, static_cast<std::uint64_t>(m)));
  return out;
}

template <class State>
std::vector<Trajectory<State>> sample_trajectories_reference(
    const DiscountedMdp<State>& mdp, const StationaryPolicy<State>& policy,
    std::size_t count, std::uint64_t seed) {
  std::vector<Trajectory<State>> out;
  for (std::size_t m = 0; m < count; ++m)
    out.push_back(rollout(mdp, policy, derive_seed(seed, m)));
  return out;
}

/// Mixed-policy rollouts: the base policy for episode m is drawn once from
/// derive_seed(seed, m, 1) before the episode starts.
template <class State>
std::vector<double> episode_returns(const DiscountedMdp<State>& mdp,
                                    const MixedPolicy<State>& mixed,
                                    std::size_t episodes, std::uint64_t seed) {
  mixed.validate();
  mdp.validate();
  std::vector<double> out(episodes);
  const auto n = static_cast<std::int64_t>(episodes);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t m = 0; m < n; ++m) {
    auto idx = static_cast<std::uint64_t>(m);
    auto base = sample_mixed(mixed, derive_seed(seed, idx, 1));
    out[static_cast<std::size_t>(m)] =
        discounted_return(mdp, rollout(mdp, *base, derive_seed(seed, idx)));
  }
  return out;
}

}  // namespace irl
