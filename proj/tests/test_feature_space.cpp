#include <doctest.h>

#include <omp.h>

#include <cmath>

#include "irl/feature_space.hpp"
#include "irl/gridworld.hpp"

using namespace irl;

namespace {

FeatureSpace random_space(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<FeatureVector> vs;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v(dim);
    for (auto& x : v) x = std::round(standard_normal(rng) * 4.0) / 4.0;
    vs.push_back(v);
  }
  return FeatureSpace::build(vs);
}

FeatureVector touch(double xp, double yp, double vm, double vd, double am) {
  return {0.0, xp, yp, vm, vd, am};
}

const FeatureVector kNoTouch = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

}  // namespace

TEST_CASE("build dedupes and sorts") {
  std::vector<FeatureVector> vs = {{1, 0}, {0, 1}, {1, 0}, {0, 0}};
  auto space = FeatureSpace::build(vs);
  REQUIRE(space.size() == 3);
  CHECK(space.vector(0) == FeatureVector{0, 0});
  CHECK(space.vector(2) == FeatureVector{1, 0});
  CHECK(space.index_of({0, 1}) == 1);
  CHECK(space.matrix().cols() == 3);
  CHECK(space.matrix()(0, 2) == 1.0);
  CHECK(!space.find({5, 5}));
  try {
    space.index_of({5, 5});
    FAIL("expected unknown_feature");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_feature);
    CHECK(std::string(e.what()).find("[5 5]") != std::string::npos);
  }
  // Order of input does not change the space or its hash.
  std::vector<FeatureVector> shuffled = {{0, 0}, {1, 0}, {0, 1}};
  CHECK(FeatureSpace::build(shuffled).hash() == space.hash());
  CHECK(space.hash() == fnv1a64(space.export_text()));
  CHECK(space.hash_hex().size() == 16);
}

TEST_CASE("build errors") {
  std::vector<FeatureVector> mixed = {{1}, {1, 2}};
  CHECK_THROWS_AS(FeatureSpace::build(mixed), Error);
  std::vector<FeatureVector> none;
  CHECK_THROWS_AS(FeatureSpace::build(none), Error);
  std::vector<FeatureVector> three = {{1}, {2}, {3}};
  try {
    FeatureSpace::build(three, 2);
    FAIL("expected capacity");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::capacity);
  }
  CHECK(FeatureSpace::build(three, 3).size() == 3);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("feature expectation examples") {
  // phi(s) = e0 for every state: with gamma = 0.9 and three ticks, mu = 2.71 e0.
  auto phi = [](const StateIndex&) { return FeatureVector{1.0, 0.0}; };
  std::vector<FeatureVector> vs = {{1.0, 0.0}};
  auto space = FeatureSpace::build(vs);
  Trajectory<StateIndex> t;
  t.states = {0, 1, 2};
  t.actions = {0, 0, 0};
  std::vector<Trajectory<StateIndex>> trajs = {t, t};
  auto mu = estimate_mu<StateIndex>(trajs, 0.9, ExpectationForm::feature, space, phi);
  CHECK(mu.values.size() == 2);
  CHECK(mu.values[0] == doctest::Approx(2.71).epsilon(1e-15));
  CHECK(mu.values[1] == 0.0);
  CHECK(mu.samples == 2);
  // gamma = 1 gives 3 e0.
  auto undiscounted = estimate_mu<StateIndex>(trajs, 1.0, ExpectationForm::feature, space, phi);
  CHECK(undiscounted.values[0] == 3.0);
  std::vector<Trajectory<StateIndex>> none;
  CHECK_THROWS_AS(estimate_mu<StateIndex>(none, 0.9, ExpectationForm::feature, space, phi), Error);
}

TEST_CASE("feature form is Phi times visitation form") {
  Rng rng(4);
  std::vector<Trajectory<StateIndex>> trajs(20);
  for (auto& t : trajs)
    for (int i = 0; i < 30; ++i) {
      t.states.push_back(uniform_index(rng, 9));
      t.actions.push_back(0);
    }
  auto phi = [](const StateIndex& s) { return FeatureVector{double(s % 3), double(s / 3), 1.0}; };
  auto space = scan_feature_space<StateIndex>(trajs, phi);
  CHECK(space.size() == 9);
  auto vis = estimate_mu<StateIndex>(trajs, 0.95, ExpectationForm::visitation, space, phi);
  auto feat = estimate_mu<StateIndex>(trajs, 0.95, ExpectationForm::feature, space, phi);
  CHECK((space.matrix() * vis.values - feat.values).cwiseAbs().maxCoeff() == 0.0);
  double total = 0.0, d = 1.0;
  for (int i = 0; i < 30; ++i, d *= 0.95) total += d;
  CHECK(vis.values.sum() == doctest::Approx(total).epsilon(1e-12));
  CHECK_THROWS_AS(scan_feature_space<StateIndex>(trajs, phi, 4), Error);
}

TEST_CASE("kernel spec parsing") {
  CHECK(KernelSpec::parse("dot").kind == KernelKind::dot_product);
  auto g = KernelSpec::parse("gaussian:0.25");
  CHECK(g.kind == KernelKind::gaussian);
  CHECK(g.bandwidth == 0.25);
  CHECK(KernelSpec::parse("gaussian").bandwidth == 0.6);
  CHECK(KernelSpec::parse("game-gaussian:0.6").to_string() == "game-gaussian:0.6");
  CHECK_THROWS_AS(KernelSpec::parse("gaussian:0"), Error);
  CHECK_THROWS_AS(KernelSpec::parse("gaussian:-1"), Error);
  CHECK_THROWS_AS(KernelSpec::parse("rbf"), Error);
}

TEST_CASE("closed-form kernel values") {
  KernelSpec g{KernelKind::gaussian, 1.0};
  CHECK(kernel_value(g, {0, 0}, {1, 0}) == doctest::Approx(std::exp(-0.5)));
  CHECK(kernel_value(g, {3, 1}, {3, 1}) == 1.0);
  KernelSpec dot{KernelKind::dot_product, 0.0};
  CHECK(kernel_value(dot, {1, 2}, {3, 4}) == 11.0);
  CHECK_THROWS_AS(kernel_value(dot, {1}, {1, 2}), Error);
  KernelSpec m{KernelKind::explicit_matrix, 0.0};
  CHECK_THROWS_AS(kernel_value(m, {1}, {1}), Error);
}

TEST_CASE("dot-product Gram is Phi^T Phi") {
  Rng rng(9);
  auto space = random_space(rng, 30, 4);
  auto k = gram_matrix(KernelSpec{KernelKind::dot_product, 0.0}, space);
  Eigen::MatrixXd expect = space.matrix().transpose() * space.matrix();
  CHECK((k.gram() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("indefinite and asymmetric matrices are rejected") {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  try {
    Kernel::from_matrix(bad);
    FAIL("expected indefinite_kernel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::indefinite_kernel);
  }
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(Kernel::from_matrix(asym), Error);
  CHECK_THROWS_AS(Kernel::from_matrix(Eigen::MatrixXd(0, 0)), Error);
  CHECK(Kernel::from_matrix(Eigen::Matrix2d::Identity()).min_eigenvalue() == 1.0);
}

TEST_CASE("parallel Gram equals the serial reference") {
  Rng rng(12);
  auto space = random_space(rng, 150, 3);
  const int saved = omp_get_max_threads();
  for (const char* k : {"dot", "gaussian:0.6"}) {
    auto spec = KernelSpec::parse(k);
    auto ref = gram_matrix_reference(spec, space);
    omp_set_num_threads(1);
    auto serial = gram_entries(spec, space);
    CHECK((serial - ref).cwiseAbs().maxCoeff() < 1e-12);
    // Thread count never changes a single bit.
    for (int threads : {2, 4}) {
      omp_set_num_threads(threads);
      CHECK(gram_entries(spec, space) == serial);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("k_norm examples and triangle inequality") {
  Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  CHECK(k_norm(Eigen::Vector2d(3, 4), id) == 5.0);
  CHECK(k_norm(Eigen::Vector2d(0, 0), id) == 0.0);
  Rng rng(31);
  auto space = random_space(rng, 40, 3);
  auto k = gram_matrix(KernelSpec{KernelKind::gaussian, 0.6}, space);
  const auto n = static_cast<Eigen::Index>(space.size());
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd a(n), b(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      a[j] = standard_normal(rng);
      b[j] = standard_normal(rng);
    }
    REQUIRE(k_norm(a + b, k) <= k_norm(a, k) + k_norm(b, k) + 1e-9);
    REQUIRE(k_norm(2.5 * a, k) == doctest::Approx(2.5 * k_norm(a, k)));
  }
}

TEST_CASE("Gaussian Gram is PSD on random spaces") {
  for (int s = 0; s < 100; ++s) {
    Rng rng(derive_seed(44, s));
    std::size_t n = 1 + uniform_index(rng, 200), dim = 1 + uniform_index(rng, 6);
    auto space = random_space(rng, n, dim);
    double bw = 0.1 + 2.0 * uniform01(rng);
    auto k = gram_matrix(KernelSpec{KernelKind::gaussian, bw}, space);
    REQUIRE(k.min_eigenvalue() >= -kPsdTolerance);
  }
}

TEST_CASE("game kernel distance") {
  auto a = touch(0, 0, 0, 0, 0), b = touch(2, 2, 7, 3, 5);
  CHECK(game_kernel_distance(a, a) == 0.0);
  CHECK(game_kernel_distance(kNoTouch, kNoTouch) == 0.0);
  CHECK(game_kernel_distance(kNoTouch, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(game_kernel_distance(kNoTouch, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(game_kernel_distance(a, b) == doctest::Approx(game_kernel_distance(b, a)));
  // Direction bins wrap: 0 and 7 are neighbours.
  CHECK(game_kernel_distance(touch(1, 1, 1, 0, 1), touch(1, 1, 1, 7, 1)) ==
        doctest::Approx(game_kernel_distance(touch(1, 1, 1, 0, 1), touch(1, 1, 1, 1, 1))));
  CHECK(game_kernel_distance(touch(1, 1, 1, 0, 1), touch(1, 1, 1, 1, 1)) == doctest::Approx(0.125));
  CHECK_THROWS_AS(game_kernel_distance(touch(3, 0, 0, 0, 0), a), Error);
  CHECK_THROWS_AS(game_kernel_distance(FeatureVector{1, 1, 0, 0, 0, 0}, a), Error);
  CHECK_THROWS_AS(game_kernel_distance(FeatureVector{0, 0, 0}, a), Error);
  CHECK(kernel_value(KernelSpec{KernelKind::game_gaussian, 1.0}, kNoTouch, a) ==
        doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("game Gram on a full sample of touch bins is PSD") {
  std::vector<FeatureVector> vs = {kNoTouch};
  for (int x = 0; x < 3; ++x)
    for (int vm = 0; vm < 8; vm += 3)
      for (int vd = 0; vd < 8; ++vd)
        for (int am = 0; am < 6; am += 2) vs.push_back(touch(x, 2 - x, vm, vd, am));
  auto space = FeatureSpace::build(vs);
  auto k = gram_matrix(KernelSpec{KernelKind::game_gaussian, 0.6}, space);
  CHECK(k.min_eigenvalue() >= -kPsdTolerance);
  auto ref = gram_matrix_reference(KernelSpec{KernelKind::game_gaussian, 0.6}, space);
  CHECK((k.gram() - ref).cwiseAbs().maxCoeff() < 1e-12);
}
