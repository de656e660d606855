#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "irl/game.hpp"
#include "irl/reward_pipeline.hpp"
#include "irl/service.hpp"
#include "irl/trajectory_io.hpp"

using namespace irl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("irlkit-cli-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "irlkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Json read_json(const fs::path& p) {
  std::ifstream in(p);
  return Json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  for (auto f : split(line, ',')) out.emplace_back(f);
  return out;
}

// Output contents with nondeterministic columns removed. CSV columns whose
// header contains the marked name are dropped; other marked files are skipped.
std::map<std::string, std::string> deterministic_outputs(const fs::path& dir) {
  Json m = read_json(dir / "manifest.json");
  std::map<std::string, std::vector<std::string>> marks;
  for (const auto& n : m["nondeterministic"]) marks[n["file"]].push_back(n["column"]);
  std::map<std::string, std::string> out;
  for (const auto& o : m["outputs"]) {
    auto path = o["path"].get<std::string>();
    auto it = marks.find(path);
    if (it == marks.end()) {
      out[path] = o["fnv1a64"].get<std::string>();
      continue;
    }
    if (fs::path(path).extension() != ".csv") continue;
    std::ifstream in(dir / path);
    std::string line, kept;
    std::getline(in, line);
    auto header = cells(line);
    std::vector<bool> drop(header.size(), false);
    for (std::size_t i = 0; i < header.size(); ++i)
      for (const auto& col : it->second) drop[i] = drop[i] || header[i].find(col) != std::string::npos;
    do {
      auto row = cells(line);
      for (std::size_t i = 0; i < row.size(); ++i)
        if (i >= drop.size() || !drop[i]) kept += row[i] + ',';
      kept += '\n';
    } while (std::getline(in, line));
    out[path] = kept;
  }
  return out;
}

std::vector<std::string> bench_args(const fs::path& out) {
  return {"bench", "gridworld", "--sizes", "4", "--reps", "2", "--algos", "pirl,kpirl",
          "--seed", "7", "--format", "csv", "--out", out.string()};
}

}  // namespace

TEST_CASE("model specs") {
  auto s = cli::ModelSpec::parse("gridworld:n=8,seed=3");
  CHECK(s.name == "gridworld");
  CHECK(s.get("n", "") == "8");
  CHECK(s.get("seed", "") == "3");
  CHECK(s.get("gamma", "0.9") == "0.9");
  auto bare = cli::ModelSpec::parse("chain");
  CHECK(bare.name == "chain");
  CHECK(bare.params.empty());
}

TEST_CASE("indexed tables round-trip") {
  TempDir dir("table");
  cli::IndexedTable t;
  t.header = {{"kernel", "gaussian:0.6"}, {"note", "two words"}};
  t.values = {0.1, -2.5, 1e-300, 3.0};
  {
    std::ofstream f(dir.path / "t.txt");
    cli::write_indexed_table(f, t);
  }
  auto back = cli::read_indexed_table((dir.path / "t.txt").string());
  CHECK(back.values == t.values);
  CHECK(back.field("kernel") == "gaussian:0.6");
  CHECK(back.field("note") == "two words");
  CHECK(back.field("count") == "4");
  CHECK_FALSE(back.has("missing"));
  CHECK_THROWS_AS(back.field("missing"), Error);

  std::ofstream(dir.path / "gap.txt") << "count 2\n0 1\n2 1\n";
  CHECK_THROWS_AS(cli::read_indexed_table((dir.path / "gap.txt").string()), Error);
  std::ofstream(dir.path / "short.txt") << "count 3\n0 1\n1 1\n";
  CHECK_THROWS_AS(cli::read_indexed_table((dir.path / "short.txt").string()), Error);
}

TEST_CASE("exit codes and error lines") {
  TempDir dir("codes");
  auto unknown = invoke({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.rfind("error: code=usage", 0) == 0);

  auto no_seed = invoke({"bench", "gridworld", "--sizes", "4", "--reps", "1", "--out", dir.path.string()});
  CHECK(no_seed.code == 2);
  CHECK(no_seed.err.find("--seed") != std::string::npos);

  auto no_expert = invoke({"learn", "kpirl", "--mdp", "gridworld:n=4", "--seed", "1", "--out", dir.path.string()});
  CHECK(no_expert.code == 1);
  CHECK(no_expert.err.find("code=missing-input") != std::string::npos);

  auto bad_model = invoke({"solve", "dei", "--mdp", "nowhere", "--seed", "1", "--out", dir.path.string()});
  CHECK(bad_model.code == 1);
  CHECK(bad_model.err.find("code=unsupported-model") != std::string::npos);

  std::ofstream(dir.path / "service.json") << R"({"store": "store"})";
  auto serve = invoke({"serve", "--service", (dir.path / "service.json").string(), "--out", dir.path.string()});
  CHECK(serve.code == 2);
  CHECK(serve.err.find("seed") != std::string::npos);

  CHECK(invoke({"--version"}).code == 0);
}

TEST_CASE("bench smoke run and rerun equality") {
  TempDir a("bench-a"), b("bench-b");
  auto first = invoke(bench_args(a.path));
  REQUIRE(first.code == 0);
  CHECK(fs::is_regular_file(a.path / "report.csv"));
  CHECK(fs::is_regular_file(a.path / "runs.csv"));
  Json m = read_json(a.path / "manifest.json");
  CHECK(m["command"] == "bench gridworld");
  CHECK(m["seed"] == 7);
  REQUIRE(invoke(bench_args(b.path)).code == 0);
  auto ha = deterministic_outputs(a.path), hb = deterministic_outputs(b.path);
  CHECK(ha.count("report.csv") == 1);
  CHECK(ha.count("runs.csv") == 1);
  CHECK(ha == hb);
}

TEST_CASE("config keys override flags; unknown keys are usage errors") {
  TempDir dir("config");
  std::ofstream(dir.path / "cfg.json") << R"({"sizes": [5], "reps": 1})";
  auto args = bench_args(dir.path / "out");
  args.push_back("--config");
  args.push_back((dir.path / "cfg.json").string());
  REQUIRE(invoke(args).code == 0);
  std::string report = slurp(dir.path / "out" / "report.csv");
  CHECK(report.find(",5,") != std::string::npos);
  CHECK(report.find(",4,") == std::string::npos);
  Json m = read_json(dir.path / "out" / "manifest.json");
  CHECK(m["inputs"].size() == 1);

  std::ofstream(dir.path / "bogus.json") << R"({"no-such-flag": 1})";
  auto bad = bench_args(dir.path / "bad");
  bad.push_back("--config");
  bad.push_back((dir.path / "bogus.json").string());
  CHECK(invoke(bad).code == 2);
}

TEST_CASE("thread count does not change results") {
  TempDir one("t1"), all("tall");
  auto a1 = bench_args(one.path);
  a1.push_back("--threads");
  a1.push_back("1");
  REQUIRE(invoke(a1).code == 0);
  REQUIRE(invoke(bench_args(all.path)).code == 0);
  CHECK(deterministic_outputs(one.path) == deterministic_outputs(all.path));

  TempDir s1("dei1"), s4("dei4");
  std::vector<std::string> dei = {"solve", "dei", "--mdp", "chain", "--seed", "3", "-I", "3"};
  auto d1 = dei, d4 = dei;
  d1.insert(d1.end(), {"--threads", "1", "--out", s1.path.string()});
  d4.insert(d4.end(), {"--threads", "4", "--out", s4.path.string()});
  REQUIRE(invoke(d1).code == 0);
  REQUIRE(invoke(d4).code == 0);
  CHECK(deterministic_outputs(s1.path) == deterministic_outputs(s4.path));
}

TEST_CASE("client fixtures agree with the library") {
  TempDir dir("fixtures");
  auto r = invoke({"export", "treatment", "--control", "--fixtures", "40", "--seed", "9", "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  Json fx = read_json(dir.path / "fixtures.json");
  std::ifstream tin(dir.path / "treatment.txt");
  Treatment treatment = import_treatment(tin, game_feature_space().hash());
  CHECK(fx["space_hash"] == hash_hex(treatment.space_hash));
  CHECK(fx["states"].size() == 40);

  auto codec = game_codec();
  std::size_t targets_seen = 0;
  for (const auto& entry : fx["states"]) {
    std::string text = entry["state"].get<std::string>();
    GameState s = codec.decode(split(text, ','));
    REQUIRE(entry["targets"].size() == s.targets.size());
    for (std::size_t k = 0; k < s.targets.size(); ++k) {
      const auto& t = entry["targets"][k];
      FeatureVector phi = display_phi(s, k);
      CHECK(t["phi"].get<FeatureVector>() == phi);
      std::size_t index = game_feature_index(phi);
      CHECK(t["index"].get<std::size_t>() == index);
      CHECK(t["value"].get<double>() == treatment.values[index]);
      CHECK(t["fill"].get<double>() == fill_fraction(treatment.values[index], treatment.ceiling));
      ++targets_seen;
    }
  }
  CHECK(targets_seen > 0);

  for (const auto& seq : fx["smoothing"]) {
    SmoothingState state;
    auto in = seq["inputs"].get<std::vector<double>>();
    auto out = seq["outputs"].get<std::vector<double>>();
    REQUIRE(in.size() == out.size());
    for (std::size_t t = 0; t < in.size(); ++t) CHECK(std::abs(state.update(in[t]) - out[t]) <= 1e-6);
  }

  // The exported file is a valid arm, and a full-length upload against it is accepted.
  ServiceConfig cfg;
  cfg.seed = 1;
  cfg.store = dir.path / "store";
  cfg.arms = {{"control", treatment}};
  cfg.clock = [] { return std::int64_t{1700000000}; };
  SessionService svc(cfg);
  auto session = svc.create_session({}).session;
  GameConfig game;
  auto run = simulate_game(game, ChasePolicy(game), 5);
  REQUIRE(run.trajectory.states.size() == 450);
  std::ostringstream text;
  std::vector<Trajectory<GameState>> trajs = {run.trajectory};
  write_trajectories<GameState>(text, trajs, game_codec());
  TrajectoryUpload up;
  up.session_id = session.id;
  up.phase = GamePhase::pretest;
  up.refresh_hz = 60.0;
  up.trajectory = text.str();
  auto res = svc.ingest(up);
  CHECK(res.accepted);
  CHECK(res.reason.empty());
}
