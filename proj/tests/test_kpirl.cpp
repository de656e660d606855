#include <doctest.h>

#include <sstream>

#include "irl/gridworld.hpp"
#include "irl/kpirl.hpp"
#include "irl/trajectory_io.hpp"

using namespace irl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::shared_ptr<const Kernel> identity_kernel(Eigen::Index n) {
  return std::make_shared<const Kernel>(Kernel::from_matrix(Eigen::MatrixXd::Identity(n, n)));
}

// Hands back a fixed sequence of visitation vectors and records the rewards.
class ScriptedSolver final : public RlSolver {
 public:
  explicit ScriptedSolver(std::vector<Eigen::VectorXd> script) : script_(std::move(script)) {}
  PolicyOutcome solve(const KernelReward& reward) override {
    alphas.push_back(reward.alpha());
    if (next_ >= script_.size()) throw std::runtime_error("script exhausted");
    return {next_, script_[next_++]};
  }
  std::vector<Eigen::VectorXd> alphas;

 private:
  std::vector<Eigen::VectorXd> script_;
  std::size_t next_ = 0;
};

Eigen::MatrixXd random_psd(Rng& rng, Eigen::Index n) {
  Eigen::MatrixXd a(n, n);
  for (auto& x : a.reshaped()) x = standard_normal(rng);
  return a * a.transpose();
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = standard_normal(rng);
  return v;
}

// Random tabular MDP whose states map onto a smaller feature index set.
struct FeaturedMdp {
  TabularMdp mdp;
  std::vector<std::size_t> index;
  std::size_t features;
};

FeaturedMdp random_featured(Rng& rng) {
  std::size_t S = 3 + uniform_index(rng, 8), N = 2 + uniform_index(rng, S - 1);
  FeaturedMdp f{random_tabular_mdp(S, 3, 0.9, 12, rng), {}, N};
  for (std::size_t s = 0; s < S; ++s) f.index.push_back(s < N ? s : uniform_index(rng, N));
  return f;
}

}  // namespace

TEST_CASE("projection step examples") {
  Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  auto a = projection_step(vec({0, 0}), vec({1, 0}), vec({2, 0}), id);
  CHECK(a.kappa_raw == 2.0);
  CHECK(a.kappa == 1.0);
  CHECK(a.mu_bar == vec({1, 0}));
  auto b = projection_step(vec({0, 0}), vec({1, 0}), vec({0.5, 0.5}), id);
  CHECK(b.kappa_raw == 0.5);
  CHECK(b.mu_bar == vec({0.5, 0}));
  // Expert on the segment: distance vanishes.
  auto c = projection_step(vec({0, 1}), vec({4, 1}), vec({3, 1}), id);
  CHECK(k_norm(vec({3, 1}) - c.mu_bar, id) == 0.0);
  // Negative ratio clamps to 0.
  auto d = projection_step(vec({0, 0}), vec({1, 0}), vec({-1, 0}), id);
  CHECK(d.kappa_raw == -1.0);
  CHECK(d.kappa == 0.0);
  try {
    projection_step(vec({1, 1}), vec({1, 1}), vec({2, 0}), id);
    FAIL("expected stagnation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::stagnation);
  }
}

TEST_CASE("immediate exit when the first policy matches") {
  auto k = identity_kernel(2);
  ScriptedSolver solver({vec({2, 0})});
  KpirlConfig cfg;
  cfg.epsilon = 0.0;
  auto run = run_kpirl(vec({2, 0}), k, solver, cfg);
  CHECK(run.converged());
  CHECK(run.iterations.size() == 1);
  CHECK(run.final_distance() == 0.0);
  CHECK(run.mixture_weights == std::vector<double>{1.0});
  CHECK(run.iterations[0].alpha.norm() == doctest::Approx(1.0));
}

TEST_CASE("two-point toy follows the loop arithmetic") {
  auto k = identity_kernel(2);
  // mu_1 = (1,0) so mu_bar_1 = (1,0); alpha_2 = mu_E - mu_bar_1 = (1,0).
  ScriptedSolver solver({vec({1, 0}), vec({2, 0})});
  KpirlConfig cfg;
  cfg.epsilon = 1e-12;
  auto run = run_kpirl(vec({2, 0}), k, solver, cfg);
  REQUIRE(solver.alphas.size() == 2);
  CHECK(solver.alphas[1] == vec({1, 0}));
  CHECK(run.iterations[1].kappa == 1.0);
  CHECK(run.converged());
  CHECK(run.mixture_weights == std::vector<double>{0.0, 1.0});
}

TEST_CASE("stagnation carries the partial run") {
  auto k = identity_kernel(2);
  ScriptedSolver solver({vec({1, 0}), vec({1, 0})});
  KpirlConfig cfg;
  cfg.epsilon = 0.1;
  try {
    run_kpirl(vec({0, 3}), k, solver, cfg);
    FAIL("expected stagnation");
  } catch (const KpirlStagnation& e) {
    CHECK(e.code() == Errc::stagnation);
    CHECK(e.partial().iterations.size() == 1);
    CHECK(e.partial().stop == KpirlStop::stagnated);
  }
}

TEST_CASE("solver failures carry the iteration index") {
  auto k = identity_kernel(2);
  ScriptedSolver solver({vec({1, 0})});
  KpirlConfig cfg;
  cfg.epsilon = 0.1;
  try {
    run_kpirl(vec({0, 3}), k, solver, cfg);
    FAIL("expected solver failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::solver_failure);
    CHECK(std::string(e.what()).find("iteration 2") != std::string::npos);
  }
  ScriptedSolver wrong({vec({1, 0, 0})});
  CHECK_THROWS_AS(run_kpirl(vec({0, 3}), k, wrong, cfg), Error);
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(run_kpirl(vec({0, 3}), k, solver, cfg), Error);
}

TEST_CASE("reward_from_alpha examples") {
  auto k = identity_kernel(4);
  auto r = reward_from_alpha(vec({0, 0, 1, 0}), k);
  CHECK(r.values() == vec({0, 0, 1, 0}));
  CHECK(r.normalized());
  CHECK(reward_from_alpha(Eigen::VectorXd::Zero(4), k).values().isZero(0.0));
  CHECK(!reward_from_alpha(vec({3, 0, 0, 0}), k).normalized());
  CHECK_THROWS_AS(reward_from_alpha(vec({1, 0}), k), Error);
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(uniform_index(rng, 30));
    auto kk = std::make_shared<const Kernel>(Kernel::from_matrix(random_psd(rng, n)));
    Eigen::VectorXd alpha = random_vector(rng, n);
    auto rr = reward_from_alpha(alpha, kk);
    for (Eigen::Index j = 0; j < n; ++j) {
      double naive = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) naive += alpha[i] * kk->gram()(i, j);
      REQUIRE(rr.at(static_cast<std::size_t>(j)) == doctest::Approx(naive).epsilon(1e-12));
    }
  }
}

TEST_CASE("select the iteration closest to the expert") {
  auto k = identity_kernel(1);
  KpirlRun run;
  run.expert_mu = vec({0});
  for (double d : {3.0, 1.0, 2.0}) {
    KpirlIteration it;
    it.alpha = vec({d});
    it.mu = vec({d});
    run.iterations.push_back(it);
  }
  CHECK(select_iteration(run, k->gram()) == 1);
  CHECK(select_reward(run, k).alpha() == vec({1.0}));
  run.iterations[0].mu = vec({-1.0});
  CHECK(select_iteration(run, k->gram()) == 0);
  run.iterations.resize(1);
  CHECK(select_iteration(run, k->gram()) == 0);
  run.iterations.clear();
  CHECK_THROWS_AS(select_iteration(run, k->gram()), Error);
}

TEST_CASE("value identity and value bound on random MDPs") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(808, trial));
    auto f = random_featured(rng);
    const auto n = static_cast<Eigen::Index>(f.features);
    auto kernel = std::make_shared<const Kernel>(Kernel::from_matrix(random_psd(rng, n)));
    Eigen::VectorXd alpha = random_vector(rng, n);
    alpha /= k_norm(alpha, *kernel);
    auto reward = reward_from_alpha(alpha, kernel);
    REQUIRE(reward.normalized());
    TabularExactSolver solver(f.mdp, f.index, f.features);
    auto mdp = f.mdp.with_reward(solver.state_reward(reward));
    auto p1 = random_stochastic_policy(mdp.num_states(), 3, rng);
    auto p2 = random_stochastic_policy(mdp.num_states(), 3, rng);
    auto mu1 = visitation_expectation(mdp, p1, f.index, f.features);
    auto mu2 = visitation_expectation(mdp, p2, f.index, f.features);
    const double v1 = expected_value(mdp, p1), v2 = expected_value(mdp, p2);
    REQUIRE(std::abs(v1 - alpha.dot(kernel->gram() * mu1)) <= 1e-9);
    REQUIRE(std::abs(v1 - v2) <= k_norm(mu1 - mu2, *kernel) + 1e-9);
  }
}

TEST_CASE("8x8 gridworld converges monotonically within eps 1") {
  GridworldConfig gc;
  gc.seed = 21;
  auto world = generate_gridworld(gc);
  auto expert = simulate_expert(world, 100, 4);
  IrlSettings s;
  s.kpirl.epsilon = 1.0;
  s.kpirl.max_iterations = 50;
  s.kpirl.seed = 2;
  auto learned = learn_gridworld_reward(world, expert.trajectories, IrlAlgorithm::kpirl, s);
  const auto& run = learned.run;
  CHECK(run.converged());
  CHECK(run.final_distance() <= 1.0);
  CHECK(run.iterations.size() <= 50);
  double wsum = 0.0;
  Eigen::VectorXd mix = Eigen::VectorXd::Zero(run.expert_mu.size());
  for (std::size_t i = 0; i < run.iterations.size(); ++i) {
    if (i) REQUIRE(run.iterations[i].distance <= run.iterations[i - 1].distance + 1e-12);
    wsum += run.mixture_weights[i];
    mix += run.mixture_weights[i] * run.iterations[i].mu;
    REQUIRE(run.mixture_weights[i] >= 0.0);
  }
  CHECK(std::abs(wsum - 1.0) <= 1e-12);
  CHECK((mix - run.iterations.back().mu_bar).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("distances never increase across seeded gridworlds") {
  for (int w = 0; w < 20; ++w) {
    GridworldConfig gc;
    gc.seed = derive_seed(3, w);
    auto world = generate_gridworld(gc);
    auto expert = simulate_expert(world, 30, derive_seed(4, w));
    IrlSettings s;
    s.kpirl.seed = derive_seed(5, w);
    s.kpirl.epsilon_fraction = 0.01;
    s.kpirl.max_iterations = 25;
    for (auto algo : {IrlAlgorithm::kpirl, IrlAlgorithm::pirl}) {
      auto run = learn_gridworld_reward(world, expert.trajectories, algo, s).run;
      for (std::size_t i = 1; i < run.iterations.size(); ++i)
        REQUIRE(run.iterations[i].distance <= run.iterations[i - 1].distance + 1e-12);
    }
  }
}

TEST_CASE("dot-product kernel reproduces linear rewards per iteration") {
  GridworldConfig gc;
  gc.seed = 77;
  gc.n = 6;
  auto world = generate_gridworld(gc);
  auto expert = simulate_expert(world, 50, 9);
  auto kernel = std::make_shared<const Kernel>(
      gram_matrix(KernelSpec{KernelKind::dot_product, 0.0}, world.space));
  TabularExactSolver solver(world.mdp, world.feature_index, world.space.size());
  std::vector<std::vector<std::size_t>> indexed;
  for (const auto& t : expert.trajectories) {
    std::vector<std::size_t> idx;
    for (auto s : t.states) idx.push_back(world.feature_index[s]);
    indexed.push_back(idx);
  }
  auto mu_e = visitation_from_indices(indexed, world.mdp.gamma(), world.space.size());
  KpirlConfig cfg;
  cfg.epsilon_fraction = 0.01;
  cfg.max_iterations = 15;
  cfg.seed = 1;
  auto run = run_kpirl(mu_e, kernel, solver, cfg);
  const Eigen::MatrixXd& phi = world.space.matrix();
  for (const auto& it : run.iterations) {
    Eigen::VectorXd w = phi * it.alpha;
    auto reward = reward_from_alpha(it.alpha, kernel);
    for (std::size_t s = 0; s < world.num_states(); ++s) {
      auto f = grid_features(world.n, s);
      double linear = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) linear += w[static_cast<Eigen::Index>(j)] * f[j];
      REQUIRE(reward.at(world.feature_index[s]) == doctest::Approx(linear).epsilon(1e-10));
    }
  }
}

TEST_CASE("run archive lists one row per iteration") {
  auto k = identity_kernel(2);
  ScriptedSolver solver({vec({1, 0}), vec({1.5, 0.5})});
  KpirlConfig cfg;
  cfg.epsilon = 1.0;
  cfg.max_iterations = 2;
  auto run = run_kpirl(vec({2, 1}), k, solver, cfg);
  std::ostringstream out;
  write_run_archive(out, run, KernelSpec{KernelKind::gaussian, 0.6});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# kernel=gaussian:0.6 ", 0) == 0);
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    auto f = split(line, ' ');
    REQUIRE(f.size() == 6 + 2);
    CHECK(parse_u64(f[0]) == rows + 1);
    CHECK(parse_double(f[3]) == run.iterations[rows].distance);
    CHECK(parse_double(f[6]) == run.iterations[rows].alpha[0]);
    ++rows;
  }
  CHECK(rows == run.iterations.size());
}
