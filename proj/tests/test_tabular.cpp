#include <doctest.h>

#include "irl/tabular.hpp"

using namespace irl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// s0 --advance--> s1 (absorbing); action 0 stays.
TabularMdp chain(std::size_t horizon) {
  std::vector<std::vector<Transition>> succ = {{{0, 1.0}}, {{1, 1.0}}, {{1, 1.0}}, {{1, 1.0}}};
  return TabularMdp(2, 2, succ, vec({1.0, 0.0}), vec({0.0, 1.0}), 0.9, horizon);
}

// All deterministic policies, enumerated as base-|A| numbers.
std::vector<TabularPolicy> all_deterministic(std::size_t S, std::size_t A) {
  std::vector<TabularPolicy> out;
  std::size_t total = 1;
  for (std::size_t s = 0; s < S; ++s) total *= A;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<ActionIndex> acts(S);
    std::size_t c = code;
    for (std::size_t s = 0; s < S; ++s, c /= A) acts[s] = c % A;
    out.push_back(TabularPolicy::deterministic(acts, A));
  }
  return out;
}

}  // namespace

TEST_CASE("construction checks the model") {
  std::vector<std::vector<Transition>> bad = {{{0, 0.5}}, {{0, 1.0}}};
  CHECK_THROWS_AS(TabularMdp(1, 2, bad, vec({1.0}), vec({0.0}), 0.9, 5), Error);
  std::vector<std::vector<Transition>> ok = {{{0, 1.0}}, {{0, 1.0}}};
  CHECK_NOTHROW(TabularMdp(1, 2, ok, vec({1.0}), vec({0.0}), 0.9, 5));
  CHECK_THROWS_AS(TabularMdp(1, 2, ok, vec({0.5}), vec({0.0}), 0.9, 5), Error);
  CHECK_THROWS_AS(TabularMdp(1, 2, ok, vec({1.0}), vec({0.0}), 1.0, 5), Error);
  std::vector<std::vector<Transition>> off = {{{3, 1.0}}, {{0, 1.0}}};
  CHECK_THROWS_AS(TabularMdp(1, 2, off, vec({1.0}), vec({0.0}), 0.9, 5), Error);
}

TEST_CASE("ties go to action 0") {
  std::vector<std::vector<Transition>> succ = {{{0, 1.0}}, {{0, 1.0}}};
  TabularMdp one(1, 2, succ, vec({1.0}), vec({1.0}), 0.9, 10);
  CHECK(value_iteration(one).policy.actions() == std::vector<ActionIndex>{0});
  CHECK(value_iteration(one.with_horizon(kUnboundedHorizon)).policy.actions() == std::vector<ActionIndex>{0});
}

TEST_CASE("two-state chain advances; values from the Bellman fixed point") {
  auto inf = chain(kUnboundedHorizon);
  auto sol = value_iteration(inf);
  CHECK(sol.policy.actions()[0] == 1);
  // V(s1) = 1 / (1 - 0.9) = 10, V(s0) = 0 + 0.9 * 10.
  CHECK(sol.values[1] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(sol.values[0] == doctest::Approx(9.0).epsilon(1e-9));
  auto fin = value_iteration(chain(3));
  CHECK(fin.policy.actions()[0] == 1);
  CHECK(fin.values[0] == doctest::Approx(0.9 + 0.81));
}

TEST_CASE("policy evaluation by hand") {
  auto m = chain(4);
  auto stay = TabularPolicy::deterministic(std::vector<ActionIndex>{0, 0}, 2);
  auto go = TabularPolicy::deterministic(std::vector<ActionIndex>{1, 1}, 2);
  CHECK(expected_value(m, stay) == 0.0);
  CHECK(expected_value(m, go) == doctest::Approx(0.9 + 0.81 + 0.729));
  auto half = TabularPolicy::uniform(2, 2);
  // Pr(in s1 at tick t) = 1 - 0.5^(t-1).
  CHECK(expected_value(m, half) == doctest::Approx(0.9 * 0.5 + 0.81 * 0.75 + 0.729 * 0.875));
}

TEST_CASE("optimal policies survive every single-state deviation") {
  for (int k = 0; k < 20; ++k) {
    Rng rng(derive_seed(11, k));
    std::size_t S = 2 + uniform_index(rng, 15), A = 2 + uniform_index(rng, 4);
    TabularMdp m = random_tabular_mdp(S, A, 0.9, kUnboundedHorizon, rng);
    auto sol = value_iteration(m);
    const double best = expected_value(m, sol.policy);
    auto acts = sol.policy.actions();
    for (std::size_t s = 0; s < S; ++s)
      for (ActionIndex a = 0; a < A; ++a) {
        auto dev = acts;
        dev[s] = a;
        REQUIRE(expected_value(m, TabularPolicy::deterministic(dev, A)) <= best + 1e-9);
      }
  }
}

TEST_CASE("value iteration agrees with brute force over deterministic policies") {
  Rng rng(5);
  TabularMdp m = random_tabular_mdp(4, 3, 0.8, kUnboundedHorizon, rng);
  double brute = -1e300;
  for (const auto& pi : all_deterministic(4, 3)) brute = std::max(brute, expected_value(m, pi));
  CHECK(expected_value(m, value_iteration(m).policy) == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("occupancy and visitation") {
  Rng rng(3);
  TabularMdp m = random_tabular_mdp(6, 2, 0.9, 15, rng);
  auto pi = random_stochastic_policy(6, 2, rng);
  auto occ = state_occupancy(m, pi);
  double total = 0.0, d = 1.0;
  for (int t = 0; t < 15; ++t, d *= 0.9) total += d;
  CHECK(occ.sum() == doctest::Approx(total).epsilon(1e-12));
  CHECK(occ.minCoeff() >= 0.0);
  // Occupancy against R gives the value.
  CHECK(occ.dot(m.reward()) == doctest::Approx(expected_value(m, pi)).epsilon(1e-12));
  std::vector<std::size_t> index = {0, 1, 0, 1, 2, 2};
  auto mu = visitation_expectation(m, pi, index, 3);
  CHECK(mu[0] == doctest::Approx(occ[0] + occ[2]));
  CHECK(mu[2] == doctest::Approx(occ[4] + occ[5]));
  CHECK_THROWS_AS(state_occupancy(m.with_horizon(kUnboundedHorizon), pi), Error);
}

TEST_CASE("uniform-tie optimal policy") {
  Rng rng(8);
  TabularMdp m = random_tabular_mdp(5, 3, 0.9, 20, rng);
  auto flat = optimal_uniform_ties(m.with_reward(Eigen::VectorXd::Constant(5, 0.3)));
  CHECK((flat.matrix().array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  // Distinct random rewards: no ties, same choices as value iteration.
  auto split = optimal_uniform_ties(m);
  CHECK(split.actions() == value_iteration(m).policy.actions());
  CHECK(split.matrix().maxCoeff() == 1.0);
}

TEST_CASE("generative view matches the table") {
  auto m = chain(5);
  auto g = m.generative();
  auto go = TabularPolicy::deterministic(std::vector<ActionIndex>{1, 1}, 2);
  auto traj = rollout(g, go, 1);
  CHECK(traj.states == std::vector<StateIndex>{0, 1, 1, 1, 1});
  CHECK_THROWS_AS(m.with_horizon(kUnboundedHorizon).generative(), Error);
}
