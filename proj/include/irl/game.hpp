#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "irl/dei.hpp"
#include "irl/feature_space.hpp"
#include "irl/mdp.hpp"
#include "irl/trajectory_io.hpp"

namespace irl {

struct GameConfig {
  double width = 1280.0;
  double height = 720.0;
  double duration_seconds = 15.0;
  double tick_rate = 30.0;
  double spawn_rate = 5.0;  // targets per second
  std::size_t lifespan_ticks = 30;
  double area_fraction = 0.0157;
  double margin = 5.0;
  double gamma = 0.95;
  /// Acceleration bound, px/tick^2.
  double max_acceleration = 60.0;
  /// Velocity-target grid: targets (i - grid/2) * velocity_step for i < grid.
  std::size_t action_grid = 20;
  double velocity_step = 4.8;

  std::size_t horizon() const;
  double tick_period() const { return 1.0 / tick_rate; }
  double radius() const;
  std::size_t num_actions() const { return action_grid * action_grid; }
  void validate() const;
};

struct Target {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
  std::uint32_t age = 0;

  bool operator==(const Target&) const = default;
};

struct GameState {
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double ax = 0.0, ay = 0.0;
  double w = 0.0, h = 0.0;
  std::vector<Target> targets;
  /// Targets touched on the tick that produced this state.
  std::uint32_t touched = 0;

  bool operator==(const GameState&) const = default;
};

/// Velocity target of an action index: (i, j) = (a / grid, a % grid).
std::array<double, 2> action_velocity(const GameConfig& config, ActionIndex action);
ActionIndex zero_action(const GameConfig& config);
/// Grid action whose velocity target is nearest to (vx, vy).
ActionIndex nearest_action(const GameConfig& config, double vx, double vy);

/// Inversion sampler; identical across standard libraries.
std::uint32_t poisson_draw(double mean, Rng& rng);

/// Appends Poisson(lambda / tick_rate) new targets, centres uniform inside
/// the margin-inset field. Returns how many were added.
std::uint32_t spawn_targets(const GameConfig& config, GameState& state, Rng& rng);

/// Cursor at the centre, at rest, with one tick's worth of spawns.
GameState initial_game_state(const GameConfig& config, Rng& rng);

/// Deterministic part of a tick: kinematics, ageing and expiry, touches.
GameState post_decision(const GameConfig& config, const GameState& state, ActionIndex action);

/// One tick: post_decision followed by spawning.
GameState game_step(const GameConfig& config, const GameState& state, ActionIndex action,
                    Rng& rng);

// --- Features ---------------------------------------------------------------

struct GameBins {
  int xp = 0, yp = 0, vm = 0, vd = 0, am = 0;
};

int position_bin(double coordinate, double extent);
int speed_bin(double vx, double vy);
int accel_bin(double ax, double ay);
/// Direction bin of the vector (dx, dy) via atan2(-dy, -dx).
int direction_bin(double dx, double dy);

inline constexpr std::size_t kGameFeatureDim = 6;
inline constexpr std::size_t kGameTouchVectors = 3 * 3 * 8 * 8 * 6;
inline constexpr std::size_t kGameFeatureCount = kGameTouchVectors + 1;
inline constexpr std::size_t kNoTouchIndex = kGameTouchVectors;

/// [1 - T, T Xp, T Yp, T Vm, T Vd, T Am].
FeatureVector phi(const GameState& state);
FeatureVector touch_vector(const GameBins& bins);
FeatureVector no_touch_vector();

/// Features a target would produce if touched now: position and direction
/// from the target, speed and acceleration from the cursor, T = 1.
FeatureVector display_phi(const GameState& state, std::size_t target);

/// Every vector phi can produce, in lexicographic order.
std::vector<FeatureVector> enumerate_game_features();
FeatureSpace game_feature_space();

/// n(phi) without a lookup: matches game_feature_space() ordering.
std::size_t game_feature_index(const FeatureVector& phi);
std::size_t game_feature_index(const GameState& state);

// --- MDP views ----------------------------------------------------------------

/// Per-state reward from a per-feature-index table.
DiscountedMdp<GameState> game_mdp(const GameConfig& config, std::vector<double> reward_table);

/// Nearest-target offset in radius units, post-decision speed and direction.
std::uint64_t post_decision_key(const GameConfig& config, const GameState& state,
                                ActionIndex action);

/// DEI model on post-decision keys. With start states, s0 is drawn uniformly
/// from them; otherwise from initial_game_state.
DeiModel<GameState> game_dei_model(const GameConfig& config, std::vector<double> reward_table,
                                   std::vector<GameState> start_states = {});

/// Unit reward: 1 for every touch vector, 0 for no touch.
std::vector<double> unit_reward_table();

/// Steers toward the nearest live target at full speed.
class ChasePolicy final : public StationaryPolicy<GameState> {
 public:
  explicit ChasePolicy(GameConfig config) : config_(std::move(config)) {}
  std::size_t num_actions() const override { return config_.num_actions(); }
  ActionIndex choose(const GameState& s) const;
  void probabilities(const GameState& s, std::span<double> out) const override;
  ActionIndex sample(const GameState& s, Rng&) const override { return choose(s); }

 private:
  GameConfig config_;
};

// --- Trajectories -------------------------------------------------------------

/// x,y,vx,vy,ax,ay,w,h,touched,n,(tx,ty,r,age)*n
StateCodec<GameState> game_codec();

struct GameRun {
  Trajectory<GameState> trajectory;
  std::size_t spawns = 0;
  std::size_t touches = 0;
};

GameRun simulate_game(const GameConfig& config, const StationaryPolicy<GameState>& policy,
                      std::uint64_t seed);
std::vector<GameRun> simulate_games(const GameConfig& config,
                                    const StationaryPolicy<GameState>& policy,
                                    std::size_t games, std::uint64_t seed);

/// Targets spawned during a recorded game (age-0 targets per observation).
std::size_t count_spawns(const Trajectory<GameState>& trajectory);
/// Sum of the recorded per-tick touch counts.
std::size_t recorded_touches(const Trajectory<GameState>& trajectory);
/// Touches recomputed from geometry: live targets of observation t-1 whose
/// disc contains the cursor of observation t.
std::size_t replay_touch_count(const Trajectory<GameState>& trajectory,
                               std::size_t lifespan_ticks = 30);

// --- Expert fixtures ------------------------------------------------------------

/// Column order as published: T Xp, T Yp, T Vm, T Vd, T Am, 1 - T.
struct FeatureExpectationFixture {
  std::string policy;
  std::array<double, 6> values;
};

const std::vector<FeatureExpectationFixture>& published_feature_expectations();

/// Feature-form expectation reordered to the published column order.
std::array<double, 6> expert_fixture_check(std::span<const Trajectory<GameState>> trajectories,
                                           double gamma);

}  // namespace irl
