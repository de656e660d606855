#include "irl/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace irl {

std::size_t GameConfig::horizon() const {
  return static_cast<std::size_t>(std::llround(duration_seconds * tick_rate));
}

double GameConfig::radius() const {
  return std::sqrt(area_fraction * width * height / std::numbers::pi);
}

void GameConfig::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw Error(Errc::invalid_argument, "field must be non-empty");
  if (!(area_fraction > 0.0 && area_fraction < 1.0))
    throw Error(Errc::invalid_argument, "target area fraction must lie in (0, 1)");
  if (!(tick_rate > 0.0 && duration_seconds > 0.0) || horizon() < 1)
    throw Error(Errc::invalid_argument, "game needs a positive duration and tick rate");
  if (spawn_rate < 0.0 || margin < 0.0 || lifespan_ticks < 1)
    throw Error(Errc::invalid_argument, "invalid spawn rate, margin or lifespan");
  if (2.0 * (margin + radius()) > std::min(width, height))
    throw Error(Errc::invalid_argument, "field too small for a target inside the margin");
  if (action_grid < 1 || !(velocity_step > 0.0) || !(max_acceleration > 0.0))
    throw Error(Errc::invalid_argument, "invalid action grid");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(Errc::invalid_argument, "gamma must lie in [0, 1)");
}

std::array<double, 2> action_velocity(const GameConfig& config, ActionIndex action) {
  if (action >= config.num_actions())
    throw Error(Errc::invalid_argument, "game action " + std::to_string(action) + " out of range");
  const auto half = static_cast<double>(config.action_grid / 2);
  double i = static_cast<double>(action / config.action_grid);
  double j = static_cast<double>(action % config.action_grid);
  return {(i - half) * config.velocity_step, (j - half) * config.velocity_step};
}

ActionIndex zero_action(const GameConfig& config) {
  const std::size_t half = config.action_grid / 2;
  return half * config.action_grid + half;
}

ActionIndex nearest_action(const GameConfig& config, double vx, double vy) {
  const auto grid = static_cast<long>(config.action_grid);
  const long half = grid / 2;
  auto snap = [&](double v) {
    long i = std::lround(v / config.velocity_step) + half;
    return static_cast<std::size_t>(std::clamp(i, 0L, grid - 1));
  };
  return snap(vx) * config.action_grid + snap(vy);
}

std::uint32_t poisson_draw(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  double p = 1.0;
  std::uint32_t k = 0;
  while (true) {
    p *= uniform01(rng);
    if (p <= limit) return k;
    ++k;
  }
}

std::uint32_t spawn_targets(const GameConfig& config, GameState& state, Rng& rng) {
  const double r = config.radius();
  const std::uint32_t count = poisson_draw(config.spawn_rate / config.tick_rate, rng);
  const double lo = config.margin + r;
  for (std::uint32_t k = 0; k < count; ++k) {
    Target t;
    t.x = lo + uniform01(rng) * (state.w - 2.0 * lo);
    t.y = lo + uniform01(rng) * (state.h - 2.0 * lo);
    t.r = r;
    t.age = 0;
    state.targets.push_back(t);
  }
  return count;
}

GameState initial_game_state(const GameConfig& config, Rng& rng) {
  config.validate();
  GameState s;
  s.w = config.width;
  s.h = config.height;
  s.x = config.width / 2.0;
  s.y = config.height / 2.0;
  spawn_targets(config, s, rng);
  return s;
}

namespace {

bool inside_disc(const Target& t, double x, double y) {
  double dx = t.x - x, dy = t.y - y;
  return dx * dx + dy * dy <= t.r * t.r;
}

}  // namespace

GameState post_decision(const GameConfig& config, const GameState& state, ActionIndex action) {
  auto [tvx, tvy] = action_velocity(config, action);
  GameState next;
  next.w = state.w;
  next.h = state.h;
  double ax = tvx - state.vx, ay = tvy - state.vy;
  double norm = std::hypot(ax, ay);
  if (norm > config.max_acceleration) {
    ax *= config.max_acceleration / norm;
    ay *= config.max_acceleration / norm;
  }
  next.ax = ax;
  next.ay = ay;
  next.vx = state.vx + ax;
  next.vy = state.vy + ay;
  next.x = state.x + next.vx;
  next.y = state.y + next.vy;
  if (next.x < 0.0) { next.x = 0.0; next.vx = 0.0; }
  if (next.x > next.w) { next.x = next.w; next.vx = 0.0; }
  if (next.y < 0.0) { next.y = 0.0; next.vy = 0.0; }
  if (next.y > next.h) { next.y = next.h; next.vy = 0.0; }

  next.targets.reserve(state.targets.size());
  for (const Target& t : state.targets) {
    Target aged = t;
    ++aged.age;
    if (aged.age >= config.lifespan_ticks) continue;
    if (inside_disc(aged, next.x, next.y)) {
      ++next.touched;
      continue;
    }
    next.targets.push_back(aged);
  }
  return next;
}

GameState game_step(const GameConfig& config, const GameState& state, ActionIndex action,
                    Rng& rng) {
  GameState next = post_decision(config, state, action);
  spawn_targets(config, next, rng);
  return next;
}

int position_bin(double coordinate, double extent) {
  return std::min(2, static_cast<int>(std::floor(3.0 * (coordinate / extent))));
}

int speed_bin(double vx, double vy) {
  return std::min(7, static_cast<int>(std::floor(8.0 * (std::hypot(vx, vy) / 48.0))));
}

int accel_bin(double ax, double ay) {
  return std::min(5, static_cast<int>(std::floor(6.0 * (std::hypot(ax, ay) / 60.0))));
}

int direction_bin(double dx, double dy) {
  // 0.0 - v turns a zero component into +0, so a signed zero never flips
  // atan2 between -pi and pi.
  double angle = std::atan2(0.0 - dy, 0.0 - dx) + std::numbers::pi;
  return std::min(7, static_cast<int>(std::floor(8.0 * (angle / (2.0 * std::numbers::pi)))));
}

FeatureVector touch_vector(const GameBins& b) {
  return {0.0, double(b.xp), double(b.yp), double(b.vm), double(b.vd), double(b.am)};
}

FeatureVector no_touch_vector() { return {1.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }

FeatureVector phi(const GameState& s) {
  if (s.touched == 0) return no_touch_vector();
  return touch_vector({position_bin(s.x, s.w), position_bin(s.y, s.h), speed_bin(s.vx, s.vy),
                       direction_bin(s.vx, s.vy), accel_bin(s.ax, s.ay)});
}

FeatureVector display_phi(const GameState& s, std::size_t target) {
  if (target >= s.targets.size())
    throw Error(Errc::invalid_argument, "target " + std::to_string(target) + " not in state");
  const Target& t = s.targets[target];
  return touch_vector({position_bin(t.x, s.w), position_bin(t.y, s.h), speed_bin(s.vx, s.vy),
                       direction_bin(t.x - s.x, t.y - s.y), accel_bin(s.ax, s.ay)});
}

std::vector<FeatureVector> enumerate_game_features() {
  std::vector<FeatureVector> out;
  out.reserve(kGameFeatureCount);
  for (int xp = 0; xp < 3; ++xp)
    for (int yp = 0; yp < 3; ++yp)
      for (int vm = 0; vm < 8; ++vm)
        for (int vd = 0; vd < 8; ++vd)
          for (int am = 0; am < 6; ++am) out.push_back(touch_vector({xp, yp, vm, vd, am}));
  out.push_back(no_touch_vector());
  return out;
}

FeatureSpace game_feature_space() { return FeatureSpace::build(enumerate_game_features()); }

std::size_t game_feature_index(const FeatureVector& f) {
  auto fail = [&] {
    return Error(Errc::unknown_feature, "not a game feature vector: " + format_feature(f));
  };
  if (f.size() != kGameFeatureDim) throw fail();
  auto as_int = [&](double v, int hi) {
    if (!(v >= 0.0 && v <= hi) || v != std::floor(v)) throw fail();
    return static_cast<std::size_t>(v);
  };
  if (f[0] == 1.0) {
    for (std::size_t i = 1; i < kGameFeatureDim; ++i)
      if (f[i] != 0.0) throw fail();
    return kNoTouchIndex;
  }
  if (f[0] != 0.0) throw fail();
  std::size_t idx = as_int(f[1], 2);
  idx = idx * 3 + as_int(f[2], 2);
  idx = idx * 8 + as_int(f[3], 7);
  idx = idx * 8 + as_int(f[4], 7);
  idx = idx * 6 + as_int(f[5], 5);
  return idx;
}

std::size_t game_feature_index(const GameState& state) { return game_feature_index(phi(state)); }

namespace {

bool valid_state(const GameState& s) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(s.x) && finite(s.y) && finite(s.vx) && finite(s.vy) && finite(s.ax) &&
        finite(s.ay)))
    return false;
  if (s.x < 0.0 || s.x > s.w || s.y < 0.0 || s.y > s.h) return false;
  return std::all_of(s.targets.begin(), s.targets.end(), [&](const Target& t) {
    return t.x >= 0.0 && t.x <= s.w && t.y >= 0.0 && t.y <= s.h;
  });
}

}  // namespace

DiscountedMdp<GameState> game_mdp(const GameConfig& config, std::vector<double> reward_table) {
  config.validate();
  if (reward_table.size() != kGameFeatureCount)
    throw Error(Errc::invalid_argument, "game reward table needs " +
                                            std::to_string(kGameFeatureCount) + " entries");
  DiscountedMdp<GameState> mdp;
  mdp.num_actions = config.num_actions();
  mdp.gamma = config.gamma;
  mdp.horizon = config.horizon();
  mdp.initial = [config](Rng& rng) { return initial_game_state(config, rng); };
  mdp.transition = [config](const GameState& s, ActionIndex a, Rng& rng) {
    return game_step(config, s, a, rng);
  };
  auto table = std::make_shared<const std::vector<double>>(std::move(reward_table));
  mdp.reward = [table](const GameState& s) { return (*table)[game_feature_index(s)]; };
  mdp.valid = valid_state;
  return mdp;
}

std::uint64_t post_decision_key(const GameConfig& config, const GameState& state,
                                ActionIndex action) {
  GameState p = post_decision(config, state, action);
  std::uint64_t cell = 64;  // no live target
  double best = std::numeric_limits<double>::infinity();
  for (const Target& t : p.targets) {
    double dx = t.x - p.x, dy = t.y - p.y;
    double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      auto b = [&](double d) {
        auto k = static_cast<long>(std::floor(d / t.r));
        return static_cast<std::uint64_t>(std::clamp(k, -4L, 3L) + 4);
      };
      cell = b(dx) * 8 + b(dy);
    }
  }
  std::uint64_t key = cell;
  key = key * 8 + static_cast<std::uint64_t>(speed_bin(p.vx, p.vy));
  key = key * 8 + static_cast<std::uint64_t>(direction_bin(p.vx, p.vy));
  key = key * 2 + (p.touched > 0 ? 1 : 0);
  return key;
}

DeiModel<GameState> game_dei_model(const GameConfig& config, std::vector<double> reward_table,
                                   std::vector<GameState> start_states) {
  DeiModel<GameState> model;
  model.mdp = game_mdp(config, std::move(reward_table));
  if (!start_states.empty()) {
    auto starts = std::make_shared<const std::vector<GameState>>(std::move(start_states));
    model.mdp.initial = [starts](Rng& rng) { return (*starts)[uniform_index(rng, starts->size())]; };
  }
  model.q_key = [config](const GameState& s, ActionIndex a) {
    return post_decision_key(config, s, a);
  };
  return model;
}

std::vector<double> unit_reward_table() {
  std::vector<double> table(kGameFeatureCount, 1.0);
  table[kNoTouchIndex] = 0.0;
  return table;
}

ActionIndex ChasePolicy::choose(const GameState& s) const {
  const Target* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const Target& t : s.targets) {
    double d = std::hypot(t.x - s.x, t.y - s.y);
    if (d < best) {
      best = d;
      nearest = &t;
    }
  }
  if (!nearest) return zero_action(config_);
  double dx = nearest->x - s.x, dy = nearest->y - s.y;
  double speed = std::min(best, 40.0);
  if (best > 0.0) {
    dx *= speed / best;
    dy *= speed / best;
  }
  return nearest_action(config_, dx, dy);
}

void ChasePolicy::probabilities(const GameState& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  out[choose(s)] = 1.0;
}

StateCodec<GameState> game_codec() {
  StateCodec<GameState> codec;
  codec.encode = [](const GameState& s) {
    std::string out;
    for (double v : {s.x, s.y, s.vx, s.vy, s.ax, s.ay, s.w, s.h}) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(s.touched);
    out += ',';
    out += std::to_string(s.targets.size());
    for (const Target& t : s.targets) {
      out += ',' + format_double(t.x) + ',' + format_double(t.y) + ',' + format_double(t.r) + ',' +
             std::to_string(t.age);
    }
    return out;
  };
  codec.decode = [](std::span<const std::string_view> f) {
    if (f.size() < 10) throw Error(Errc::invalid_argument, "game state needs at least 10 fields");
    GameState s;
    double* dst[] = {&s.x, &s.y, &s.vx, &s.vy, &s.ax, &s.ay, &s.w, &s.h};
    for (std::size_t i = 0; i < 8; ++i) *dst[i] = parse_double(f[i]);
    s.touched = static_cast<std::uint32_t>(parse_u64(f[8]));
    std::size_t n = parse_u64(f[9]);
    if (f.size() != 10 + 4 * n)
      throw Error(Errc::invalid_argument, "game state target count does not match its fields");
    for (std::size_t k = 0; k < n; ++k) {
      Target t;
      t.x = parse_double(f[10 + 4 * k]);
      t.y = parse_double(f[11 + 4 * k]);
      t.r = parse_double(f[12 + 4 * k]);
      t.age = static_cast<std::uint32_t>(parse_u64(f[13 + 4 * k]));
      s.targets.push_back(t);
    }
    return s;
  };
  return codec;
}

std::size_t count_spawns(const Trajectory<GameState>& trajectory) {
  std::size_t n = 0;
  for (const auto& s : trajectory.states)
    for (const auto& t : s.targets) n += t.age == 0 ? 1 : 0;
  return n;
}

std::size_t recorded_touches(const Trajectory<GameState>& trajectory) {
  std::size_t n = 0;
  for (const auto& s : trajectory.states) n += s.touched;
  return n;
}

std::size_t replay_touch_count(const Trajectory<GameState>& trajectory,
                               std::size_t lifespan_ticks) {
  std::size_t n = 0;
  for (std::size_t t = 1; t < trajectory.states.size(); ++t) {
    const GameState& prev = trajectory.states[t - 1];
    const GameState& cur = trajectory.states[t];
    for (const Target& target : prev.targets)
      if (target.age + 1 < lifespan_ticks && inside_disc(target, cur.x, cur.y)) ++n;
  }
  return n;
}

GameRun simulate_game(const GameConfig& config, const StationaryPolicy<GameState>& policy,
                      std::uint64_t seed) {
  auto mdp = game_mdp(config, unit_reward_table());
  GameRun run;
  run.trajectory = rollout(mdp, policy, seed);
  run.trajectory.tick_period = config.tick_period();
  run.spawns = count_spawns(run.trajectory);
  run.touches = recorded_touches(run.trajectory);
  return run;
}

std::vector<GameRun> simulate_games(const GameConfig& config,
                                    const StationaryPolicy<GameState>& policy,
                                    std::size_t games, std::uint64_t seed) {
  std::vector<GameRun> out(games);
  const auto n = static_cast<std::int64_t>(games);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t g = 0; g < n; ++g)
    out[static_cast<std::size_t>(g)] =
        simulate_game(config, policy, derive_seed(seed, static_cast<std::uint64_t>(g)));
  return out;
}

const std::vector<FeatureExpectationFixture>& published_feature_expectations() {
  static const std::vector<FeatureExpectationFixture> rows{
      {"CT", {0.0132, 1.5261, 1.3745, -2.8490, 1.3078, 16.9471}},
      {"EH", {2.0093, 1.4241, 1.1993, -0.6871, 0.6614, 22.4824}},
      {"HH", {2.6119, 2.0059, 1.3469, 1.9244, 1.1690, 18.9064}},
      {"HL", {2.4042, 1.8073, 1.2613, -1.1199, 0.6936, 25.2415}},
      {"EL", {1.7452, 1.1804, 0.7979, 2.2178, 0.4558, 24.8904}},
      {"LH", {2.6265, 1.7592, 1.3417, -1.4283, 1.2178, 19.4081}},
      {"LL", {1.7136, 2.5636, 1.1956, -1.1634, 0.6215, 25.5276}},
  };
  return rows;
}

std::array<double, 6> expert_fixture_check(std::span<const Trajectory<GameState>> trajectories,
                                           double gamma) {
  if (trajectories.empty()) throw Error(Errc::invalid_argument, "need at least one trajectory");
  std::array<double, 6> mu{};
  for (const auto& traj : trajectories) {
    double discount = 1.0;
    for (const auto& s : traj.states) {
      FeatureVector f = phi(s);
      for (std::size_t i = 0; i < 6; ++i) mu[i] += discount * f[i];
      discount *= gamma;
    }
  }
  const double m = static_cast<double>(trajectories.size());
  return {mu[1] / m, mu[2] / m, mu[3] / m, mu[4] / m, mu[5] / m, mu[0] / m};
}

}  // namespace irl
