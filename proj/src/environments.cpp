#include "irl/environments.hpp"

#include <algorithm>
#include <cmath>

namespace irl {

TabularMdp make_chain(const ChainConfig& config) {
  const std::size_t n = config.states;
  if (n < 2) throw Error(Errc::invalid_argument, "chain needs at least two states");
  if (config.slip < 0.0 || config.slip > 1.0)
    throw Error(Errc::invalid_argument, "slip must lie in [0, 1]");
  auto move = [n](StateIndex s, int dir) -> StateIndex {
    if (dir < 0) return s == 0 ? 0 : s - 1;
    return s + 1 >= n ? n - 1 : s + 1;
  };
  std::vector<std::vector<Transition>> succ(n * 2);
  for (StateIndex s = 0; s < n; ++s) {
    for (ActionIndex a = 0; a < 2; ++a) {
      int dir = a == 0 ? -1 : 1;
      StateIndex intended = move(s, dir), slipped = move(s, -dir);
      auto& row = succ[s * 2 + a];
      if (intended == slipped) {
        row.push_back({intended, 1.0});
      } else {
        if (config.slip < 1.0) row.push_back({intended, 1.0 - config.slip});
        if (config.slip > 0.0) row.push_back({slipped, config.slip});
      }
    }
  }
  Eigen::VectorXd initial = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  reward[0] = config.start_reward;
  reward[static_cast<Eigen::Index>(n - 1)] = config.end_reward;
  return TabularMdp(n, 2, std::move(succ), std::move(initial), std::move(reward), config.gamma,
                    config.horizon);
}

namespace {

constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kHalfLength = 0.5;
constexpr double kForce = 10.0;
constexpr double kTau = 0.02;
constexpr double kThetaLimit = 12.0 * 2.0 * M_PI / 360.0;
constexpr double kXLimit = 2.4;

std::uint64_t bin(double v, double lo, double hi, std::uint64_t bins) {
  double u = (v - lo) / (hi - lo);
  auto b = static_cast<std::int64_t>(std::floor(u * static_cast<double>(bins)));
  return static_cast<std::uint64_t>(std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(bins) - 1));
}

}  // namespace

CartpoleState cartpole_step(const CartpoleState& s, ActionIndex action) {
  if (s.fallen) return s;
  const double total = kCartMass + kPoleMass;
  const double pole_ml = kPoleMass * kHalfLength;
  double force = action == 1 ? kForce : -kForce;
  double cos_t = std::cos(s.theta), sin_t = std::sin(s.theta);
  double temp = (force + pole_ml * s.theta_dot * s.theta_dot * sin_t) / total;
  double theta_acc = (kGravity * sin_t - cos_t * temp) /
                     (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total));
  double x_acc = temp - pole_ml * theta_acc * cos_t / total;
  CartpoleState next;
  next.x = s.x + kTau * s.x_dot;
  next.x_dot = s.x_dot + kTau * x_acc;
  next.theta = s.theta + kTau * s.theta_dot;
  next.theta_dot = s.theta_dot + kTau * theta_acc;
  next.fallen = std::abs(next.x) > kXLimit || std::abs(next.theta) > kThetaLimit;
  return next;
}

std::uint64_t cartpole_key(const CartpoleState& s, ActionIndex action) {
  if (s.fallen) return (1ull << 40) + action;
  std::uint64_t k = bin(s.x, -kXLimit, kXLimit, 3);
  k = k * 4 + bin(s.x_dot, -2.0, 2.0, 4);
  k = k * 6 + bin(s.theta, -kThetaLimit, kThetaLimit, 6);
  k = k * 6 + bin(s.theta_dot, -2.0, 2.0, 6);
  return k * 2 + action;
}

DeiModel<CartpoleState> cartpole_model(const CartpoleConfig& config) {
  DeiModel<CartpoleState> model;
  auto& mdp = model.mdp;
  mdp.num_actions = 2;
  mdp.gamma = config.gamma;
  mdp.horizon = config.horizon;
  mdp.initial = [](Rng& rng) {
    CartpoleState s;
    s.x = 0.1 * uniform01(rng) - 0.05;
    s.x_dot = 0.1 * uniform01(rng) - 0.05;
    s.theta = 0.1 * uniform01(rng) - 0.05;
    s.theta_dot = 0.1 * uniform01(rng) - 0.05;
    return s;
  };
  mdp.transition = [](const CartpoleState& s, ActionIndex a, Rng&) { return cartpole_step(s, a); };
  mdp.reward = [](const CartpoleState& s) { return s.fallen ? 0.0 : 1.0; };
  mdp.valid = [](const CartpoleState& s) {
    return std::isfinite(s.x) && std::isfinite(s.x_dot) && std::isfinite(s.theta) &&
           std::isfinite(s.theta_dot);
  };
  model.q_key = cartpole_key;
  model.terminal = [](const CartpoleState& s) { return s.fallen; };
  return model;
}

}  // namespace irl
