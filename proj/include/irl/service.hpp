#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "irl/game.hpp"
#include "irl/reward_pipeline.hpp"

namespace irl {

using Json = nlohmann::json;

enum class GamePhase { pretest, posttest };
std::string_view to_string(GamePhase phase);
GamePhase parse_game_phase(std::string_view text);

struct Arm {
  std::string name;
  Treatment treatment;
};

/// Free-form participant fields (age range, gender, computer type, input
/// device, first-time flag) plus the screen size.
struct ClientMetadata {
  int screen_width = 0;
  int screen_height = 0;
  std::string input_device;
  bool first_time = true;
  Json extra = Json::object();
};

ClientMetadata metadata_from_json(const Json& j);
Json to_json(const ClientMetadata& m);

struct Session {
  std::string id;
  std::string arm;
  std::int64_t created = 0;  // unix seconds
  ClientMetadata metadata;
  std::set<GamePhase> recorded;
};

struct TrajectoryUpload {
  std::string session_id;
  GamePhase phase = GamePhase::pretest;
  /// Client-measured sampling rate.
  double refresh_hz = 30.0;
  std::size_t client_touches = 0;
  /// Trajectory text (game state encoding), exactly as the client recorded it.
  std::string trajectory;
};

TrajectoryUpload upload_from_json(const Json& j);
Json to_json(const TrajectoryUpload& u);

namespace reject {
inline constexpr std::string_view unknown_session = "unknown-session";
inline constexpr std::string_view already_recorded = "already-recorded";
inline constexpr std::string_view malformed = "malformed";
inline constexpr std::string_view min_observations = "min-observations";
inline constexpr std::string_view min_refresh = "min-refresh";
}  // namespace reject

struct IngestResult {
  bool accepted = false;
  std::string reason;  // empty when accepted
  std::size_t observations = 0;
  std::size_t server_touches = 0;
  std::size_t client_touches = 0;
};

struct ArmPhaseSummary {
  std::string arm;
  GamePhase phase = GamePhase::pretest;
  std::size_t n = 0;
  double mean_touches = 0.0;
  double median_touches = 0.0;
};

struct ServiceSummary {
  std::size_t sessions = 0;
  std::vector<ArmPhaseSummary> rows;
};

Json to_json(const ServiceSummary& s);

/// Newline-delimited JSON, one file per UTC day, plus index.ndjson listing
/// (kind, session, phase, file). Records are only ever appended.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  void append(const Json& record, std::int64_t unix_seconds);
  /// Every record in append order (index order).
  std::vector<Json> load() const;
  const std::filesystem::path& root() const { return root_; }

  static std::string day_file(std::int64_t unix_seconds);

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
};

struct ServiceConfig {
  std::uint64_t seed = 0;
  std::vector<Arm> arms;
  GameConfig game;
  std::filesystem::path store;
  std::size_t min_observations = 420;
  double min_refresh_hz = 20.0;
  /// Unix seconds; injectable for tests.
  std::function<std::int64_t()> clock;
};

struct SessionResponse {
  Session session;
  const Arm* arm = nullptr;
};

/// Transport-independent core of the session service.
class SessionService {
 public:
  /// Reloads sessions and accepted uploads already in the store.
  explicit SessionService(ServiceConfig config);

  SessionResponse create_session(const ClientMetadata& metadata);
  IngestResult ingest(const TrajectoryUpload& upload);
  ServiceSummary summarize() const;

  /// Accepted trajectories for an arm and phase in the mdp-core text format.
  void export_trajectories(std::ostream& out, const std::string& arm, GamePhase phase) const;

  /// JSON bodies used by the HTTP frontend.
  Json session_payload(const SessionResponse& response) const;
  Json game_config_json() const;

  const ServiceConfig& config() const { return config_; }
  std::size_t session_count() const;

  /// Arm index for the k-th session; depends only on (seed, k).
  std::size_t assign_arm(std::uint64_t counter) const;
  std::string session_id(std::uint64_t counter) const;

 private:
  struct Accepted {
    std::string session;
    std::string arm;
    GamePhase phase;
    std::size_t server_touches;
    std::string trajectory;
  };

  ServiceConfig config_;
  SessionStore store_;
  mutable std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::vector<Accepted> accepted_;
  std::uint64_t counter_ = 0;
};

/// Builds the arm list for `serve`: control first, then each treatment file
/// keyed by its name. Treatments must match the game feature space.
ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& base_dir);

/// cpp-httplib frontend: POST /api/session, POST /api/trajectory, GET /api/summary.
class HttpFrontend {
 public:
  explicit HttpFrontend(SessionService& service);
  ~HttpFrontend();

  /// Binds to an ephemeral port when port == 0; returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace irl
