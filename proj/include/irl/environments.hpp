#pragma once

#include "irl/dei.hpp"
#include "irl/tabular.hpp"

namespace irl {

/// Five-state corridor. Action 0 retreats, action 1 advances; with
/// probability `slip` the opposite move happens. Moves past either end stay.
struct ChainConfig {
  std::size_t states = 5;
  double slip = 0.1;
  double end_reward = 1.0;
  double start_reward = 0.2;
  double gamma = 0.9;
  std::size_t horizon = 20;
};

TabularMdp make_chain(const ChainConfig& config = {});

/// Classic pole-on-cart balance task (Euler integration, 0.02 s step).
/// Reward 1 while the pole is up; a fallen pole is absorbing with reward 0.
struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  bool fallen = false;

  bool operator==(const CartpoleState&) const = default;
};

struct CartpoleConfig {
  std::size_t horizon = 40;
  double gamma = 0.99;
};

CartpoleState cartpole_step(const CartpoleState& s, ActionIndex action);

/// Binned (x, x_dot, theta, theta_dot) plus the action.
std::uint64_t cartpole_key(const CartpoleState& s, ActionIndex action);

DeiModel<CartpoleState> cartpole_model(const CartpoleConfig& config = {});

}  // namespace irl
