#include "irl/service.hpp"

#include <sodium.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "irl/trajectory_io.hpp"

namespace irl {

std::string_view to_string(GamePhase phase) {
  return phase == GamePhase::pretest ? "pretest" : "posttest";
}

GamePhase parse_game_phase(std::string_view text) {
  if (text == "pretest") return GamePhase::pretest;
  if (text == "posttest") return GamePhase::posttest;
  throw Error(Errc::invalid_argument, "unknown game phase '" + std::string(text) + "'");
}

ClientMetadata metadata_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "client metadata must be an object");
  ClientMetadata m;
  m.screen_width = j.value("screen_width", 0);
  m.screen_height = j.value("screen_height", 0);
  m.input_device = j.value("input_device", std::string());
  m.first_time = j.value("first_time", true);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "screen_width" || it.key() == "screen_height" ||
        it.key() == "input_device" || it.key() == "first_time")
      continue;
    m.extra[it.key()] = it.value();
  }
  return m;
}

Json to_json(const ClientMetadata& m) {
  Json j = m.extra;
  j["screen_width"] = m.screen_width;
  j["screen_height"] = m.screen_height;
  j["input_device"] = m.input_device;
  j["first_time"] = m.first_time;
  return j;
}

TrajectoryUpload upload_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "upload must be an object");
  TrajectoryUpload u;
  u.session_id = j.at("session_id").get<std::string>();
  u.phase = parse_game_phase(j.at("phase").get<std::string>());
  u.refresh_hz = j.at("refresh_hz").get<double>();
  u.client_touches = j.value("client_touches", std::size_t{0});
  u.trajectory = j.at("trajectory").get<std::string>();
  return u;
}

Json to_json(const TrajectoryUpload& u) {
  return {{"session_id", u.session_id},
          {"phase", std::string(to_string(u.phase))},
          {"refresh_hz", u.refresh_hz},
          {"client_touches", u.client_touches},
          {"trajectory", u.trajectory}};
}

Json to_json(const ServiceSummary& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"arm", r.arm},
                    {"phase", std::string(to_string(r.phase))},
                    {"n", r.n},
                    {"mean_touches", r.mean_touches},
                    {"median_touches", r.median_touches}});
  return {{"sessions", s.sessions}, {"arms", rows}};
}

// --- store ---------------------------------------------------------------------

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw Error(Errc::io, "cannot create store directory " + root_.string() + ": " + ec.message());
}

std::string SessionStore::day_file(std::int64_t unix_seconds) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%d.ndjson", &tm);
  return buf;
}

void SessionStore::append(const Json& record, std::int64_t unix_seconds) {
  const std::string file = day_file(unix_seconds);
  Json index = {{"file", file},
                {"kind", record.value("kind", std::string())},
                {"session", record.value("session", record.value("id", std::string()))}};
  if (record.contains("phase")) index["phase"] = record["phase"];
  std::lock_guard lock(mutex_);
  {
    std::ofstream out(root_ / file, std::ios::app | std::ios::binary);
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::io, "append to " + (root_ / file).string() + " failed");
  }
  std::ofstream idx(root_ / "index.ndjson", std::ios::app | std::ios::binary);
  idx << index.dump() << '\n';
  idx.flush();
  if (!idx) throw Error(Errc::io, "append to store index failed");
}

std::vector<Json> SessionStore::load() const {
  std::vector<Json> out;
  std::ifstream idx(root_ / "index.ndjson");
  if (!idx) return out;
  std::map<std::string, std::ifstream> files;
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    Json entry = Json::parse(line);
    const std::string file = entry.at("file").get<std::string>();
    auto it = files.find(file);
    if (it == files.end()) it = files.emplace(file, std::ifstream(root_ / file)).first;
    std::string record;
    if (!std::getline(it->second, record))
      throw Error(Errc::io, "store index points past the end of " + file);
    out.push_back(Json::parse(record));
  }
  return out;
}

// --- service ---------------------------------------------------------------------

namespace {

std::array<unsigned char, randombytes_SEEDBYTES> stream_seed(std::uint64_t seed,
                                                             std::uint64_t counter,
                                                             std::uint64_t purpose) {
  static_assert(randombytes_SEEDBYTES == 32);
  std::array<unsigned char, randombytes_SEEDBYTES> out{};
  const std::uint64_t words[4] = {seed, counter, purpose, 0x69726c6b6974ULL};
  for (std::size_t w = 0; w < 4; ++w)
    for (std::size_t b = 0; b < 8; ++b) out[w * 8 + b] = static_cast<unsigned char>(words[w] >> (8 * b));
  return out;
}

std::uint64_t stream_u64(std::uint64_t seed, std::uint64_t counter, std::uint64_t purpose) {
  auto key = stream_seed(seed, counter, purpose);
  unsigned char buf[8];
  randombytes_buf_deterministic(buf, sizeof buf, key.data());
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

std::int64_t system_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SessionService::SessionService(ServiceConfig config)
    : config_(std::move(config)), store_(config_.store) {
  if (config_.arms.empty()) throw Error(Errc::service_config, "no treatment arms configured");
  std::set<std::string> names;
  for (const auto& arm : config_.arms)
    if (!names.insert(arm.name).second)
      throw Error(Errc::service_config, "duplicate arm '" + arm.name + "'");
  config_.game.validate();
  if (!config_.clock) config_.clock = system_clock_seconds;
  if (sodium_init() < 0) throw Error(Errc::service_config, "libsodium failed to initialize");

  for (const Json& rec : store_.load()) {
    const auto kind = rec.at("kind").get<std::string>();
    if (kind == "session") {
      Session s;
      s.id = rec.at("id").get<std::string>();
      s.arm = rec.at("arm").get<std::string>();
      s.created = rec.at("created").get<std::int64_t>();
      s.metadata = metadata_from_json(rec.at("metadata"));
      sessions_[s.id] = std::move(s);
      ++counter_;
    } else if (kind == "trajectory") {
      Accepted a{rec.at("session").get<std::string>(), rec.at("arm").get<std::string>(),
                 parse_game_phase(rec.at("phase").get<std::string>()),
                 rec.at("server_touches").get<std::size_t>(),
                 rec.at("trajectory").get<std::string>()};
      auto it = sessions_.find(a.session);
      if (it != sessions_.end()) it->second.recorded.insert(a.phase);
      accepted_.push_back(std::move(a));
    }
  }
}

std::size_t SessionService::assign_arm(std::uint64_t counter) const {
  const auto r = static_cast<unsigned __int128>(stream_u64(config_.seed, counter, 0));
  return static_cast<std::size_t>((r * config_.arms.size()) >> 64);
}

std::string SessionService::session_id(std::uint64_t counter) const {
  return hash_hex(stream_u64(config_.seed, counter, 1)) + hash_hex(stream_u64(config_.seed, counter, 2));
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

SessionResponse SessionService::create_session(const ClientMetadata& metadata) {
  std::lock_guard lock(mutex_);
  const std::uint64_t k = counter_;
  const Arm& arm = config_.arms[assign_arm(k)];
  Session s;
  s.id = session_id(k);
  s.arm = arm.name;
  s.created = config_.clock();
  s.metadata = metadata;
  store_.append({{"kind", "session"},
                 {"id", s.id},
                 {"arm", s.arm},
                 {"created", s.created},
                 {"metadata", to_json(metadata)}},
                s.created);
  ++counter_;
  sessions_[s.id] = s;
  return {std::move(s), &arm};
}

IngestResult SessionService::ingest(const TrajectoryUpload& upload) {
  IngestResult result;
  result.client_touches = upload.client_touches;
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(upload.session_id);
  if (it == sessions_.end()) {
    result.reason = reject::unknown_session;
    return result;
  }
  Session& session = it->second;
  if (session.recorded.count(upload.phase)) {
    result.reason = reject::already_recorded;
    return result;
  }
  std::vector<Trajectory<GameState>> trajs;
  try {
    std::istringstream in(upload.trajectory);
    trajs = read_trajectories(in, game_codec());
  } catch (const Error&) {
    result.reason = reject::malformed;
    return result;
  }
  if (trajs.size() != 1) {
    result.reason = reject::malformed;
    return result;
  }
  const auto& traj = trajs.front();
  result.observations = traj.size();
  if (traj.size() < config_.min_observations) {
    result.reason = reject::min_observations;
    return result;
  }
  if (!(upload.refresh_hz >= config_.min_refresh_hz)) {
    result.reason = reject::min_refresh;
    return result;
  }
  result.server_touches = replay_touch_count(traj, config_.game.lifespan_ticks);
  const std::int64_t now = config_.clock();
  store_.append({{"kind", "trajectory"},
                 {"session", session.id},
                 {"arm", session.arm},
                 {"phase", std::string(to_string(upload.phase))},
                 {"received", now},
                 {"refresh_hz", upload.refresh_hz},
                 {"observations", result.observations},
                 {"client_touches", upload.client_touches},
                 {"server_touches", result.server_touches},
                 {"trajectory", upload.trajectory}},
                now);
  session.recorded.insert(upload.phase);
  accepted_.push_back({session.id, session.arm, upload.phase, result.server_touches, upload.trajectory});
  result.accepted = true;
  return result;
}

ServiceSummary SessionService::summarize() const {
  std::lock_guard lock(mutex_);
  ServiceSummary s;
  s.sessions = sessions_.size();
  for (const auto& arm : config_.arms)
    for (GamePhase phase : {GamePhase::pretest, GamePhase::posttest}) {
      std::vector<double> touches;
      for (const auto& a : accepted_)
        if (a.arm == arm.name && a.phase == phase) touches.push_back(static_cast<double>(a.server_touches));
      ArmPhaseSummary row;
      row.arm = arm.name;
      row.phase = phase;
      row.n = touches.size();
      if (!touches.empty()) {
        double sum = 0.0;
        for (double t : touches) sum += t;
        row.mean_touches = sum / static_cast<double>(touches.size());
        row.median_touches = median(touches);
      }
      s.rows.push_back(row);
    }
  return s;
}

void SessionService::export_trajectories(std::ostream& out, const std::string& arm,
                                         GamePhase phase) const {
  std::lock_guard lock(mutex_);
  for (const auto& a : accepted_) {
    if (a.arm != arm || a.phase != phase) continue;
    out << a.trajectory;
    if (!a.trajectory.empty() && a.trajectory.back() != '\n') out << '\n';
  }
}

Json SessionService::game_config_json() const {
  const auto& g = config_.game;
  return {{"duration_seconds", g.duration_seconds},
          {"tick_rate", g.tick_rate},
          {"spawn_rate", g.spawn_rate},
          {"lifespan_ticks", g.lifespan_ticks},
          {"area_fraction", g.area_fraction},
          {"margin", g.margin},
          {"smoothing_alpha", SmoothingState::kAlpha},
          {"speed_saturation", 48.0},
          {"acceleration_saturation", 60.0},
          {"min_observations", config_.min_observations},
          {"min_refresh_hz", config_.min_refresh_hz},
          {"feature_space_hash", hash_hex(game_feature_space().hash())}};
}

Json SessionService::session_payload(const SessionResponse& r) const {
  return {{"session_id", r.session.id},
          {"arm", r.session.arm},
          {"config", game_config_json()},
          {"treatment", export_treatment(r.arm->treatment)}};
}

ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  c.seed = j.value("seed", std::uint64_t{0});
  c.store = base_dir / j.value("store", std::string("store"));
  c.min_observations = j.value("min_observations", c.min_observations);
  c.min_refresh_hz = j.value("min_refresh_hz", c.min_refresh_hz);
  if (j.contains("game")) {
    const Json& g = j["game"];
    c.game.width = g.value("width", c.game.width);
    c.game.height = g.value("height", c.game.height);
    c.game.gamma = g.value("gamma", c.game.gamma);
  }
  FeatureSpace space = game_feature_space();
  if (j.value("control", true)) c.arms.push_back({"control", control_treatment(space, kNoTouchIndex)});
  for (const Json& arm : j.value("arms", Json::array())) {
    const auto name = arm.at("name").get<std::string>();
    std::filesystem::path file = base_dir / arm.at("treatment").get<std::string>();
    std::ifstream in(file);
    if (!in) throw Error(Errc::service_config, "cannot read treatment " + file.string());
    c.arms.push_back({name, import_treatment(in, space.hash())});
  }
  if (c.arms.empty()) throw Error(Errc::service_config, "no treatment arms configured");
  return c;
}

}  // namespace irl
