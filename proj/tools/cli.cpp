#include "cli.hpp"

#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <omp.h>

#include "irl/environments.hpp"
#include "irl/game.hpp"
#include "irl/gridworld.hpp"
#include "irl/reward_pipeline.hpp"
#include "irl/service.hpp"
#include "irl/trajectory_io.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace irl::cli {

namespace {

/// Bad flags or config keys; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void print_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << "error: code=" << code << " message=\"" << escape(message) << "\"\n";
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out = "irlkit-out";
  std::string config;
  int threads = 0;
  std::string format = "text";
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Base seed");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--config", c.config, "JSON file whose keys override flags");
  app->add_option("--threads", c.threads, "OpenMP threads (0 = all logical cores)");
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"text", "csv"}));
  app->add_flag("-v,--verbose", c.verbose, "Progress on stderr");
}

void apply_config(CLI::App* leaf, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_input, "cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(Errc::invalid_argument, "config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::invalid_argument, "config " + path + " is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    CLI::Option* opt = leaf->get_option_no_throw("--" + key);
    if (!opt) throw UsageError("unknown config key '" + key + "'");
    opt->clear();
    auto add = [&](const Json& v) { opt->add_result(v.is_string() ? v.get<std::string>() : v.dump()); };
    if (value.is_array()) {
      for (const auto& v : value) add(v);
    } else {
      add(value);
    }
    opt->run_callback();
  }
}

std::uint64_t require_seed(const Common& c, std::string_view command) {
  if (!c.seed) throw UsageError(std::string(command) + " is stochastic and needs --seed");
  return *c.seed;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hash_hex(fnv1a64(buf.str()));
}

/// Output directory plus the manifest written when the run finishes.
class Artifacts {
 public:
  Artifacts(const Common& common, std::string command, int argc, const char* const* argv)
      : dir_(common.out), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(Errc::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    manifest_["tool"] = "irlkit";
    manifest_["command"] = command_;
    Json args = Json::array();
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    manifest_["argv"] = args;
    manifest_["seed"] = common.seed ? Json(*common.seed) : Json(nullptr);
    manifest_["threads"] = common.threads > 0 ? common.threads : omp_get_max_threads();
    manifest_["versions"] = {
        {"irlkit", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__}};
    manifest_["inputs"] = Json::array();
    manifest_["outputs"] = Json::array();
    manifest_["nondeterministic"] = Json::array();
    if (!common.config.empty()) input(common.config);
  }

  const fs::path& dir() const { return dir_; }

  void input(const fs::path& path) {
    manifest_["inputs"].push_back({{"path", path.string()}, {"fnv1a64", file_hash(path)}});
  }

  void options(const CLI::App* leaf) {
    Json opts = Json::object();
    for (const CLI::Option* opt : leaf->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
      auto results = opt->results();
      std::string name = opt->get_name();
      if (results.empty()) continue;
      opts[name] = results.size() == 1 ? Json(results.front()) : Json(results);
    }
    manifest_["options"] = opts;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name);
    if (!out) throw Error(Errc::io, "cannot write " + (dir_ / name).string());
    out.precision(17);
    outputs_.push_back(name);
    return out;
  }

  /// Marks a column (or a whole file with "*") whose values vary between runs.
  void nondeterministic(const std::string& file, const std::string& column) {
    manifest_["nondeterministic"].push_back({{"file", file}, {"column", column}});
  }

  Json& extra() { return manifest_; }

  void finish() {
    for (const auto& name : outputs_)
      manifest_["outputs"].push_back({{"path", name}, {"fnv1a64", file_hash(dir_ / name)}});
    std::ofstream out(dir_ / "manifest.json");
    if (!out) throw Error(Errc::io, "cannot write manifest");
    out << manifest_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::string command_;
  Json manifest_;
  std::vector<std::string> outputs_;
};

void require_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw Error(Errc::missing_input, std::string(what) + " not given");
  if (!fs::is_regular_file(path)) throw Error(Errc::missing_input, std::string(what) + " " + path + " does not exist");
}

template <class State>
std::vector<Trajectory<State>> load_trajectories(const std::string& path, const StateCodec<State>& codec) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_input, "cannot read " + path);
  auto trajs = read_trajectories(in, codec);
  if (trajs.empty()) throw Error(Errc::missing_input, path + " holds no trajectories");
  return trajs;
}

std::size_t param_size(const ModelSpec& spec, const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(parse_u64(spec.get(key, std::to_string(fallback))));
}

double param_double(const ModelSpec& spec, const std::string& key, double fallback) {
  return parse_double(spec.get(key, format_double(fallback)));
}

void check_params(const ModelSpec& spec, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : spec.params)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(Errc::invalid_argument, "model '" + spec.name + "' has no parameter '" + key + "'");
}

Gridworld make_world(const ModelSpec& spec) {
  check_params(spec, {"n", "seed", "gamma", "horizon"});
  GridworldConfig cfg;
  cfg.n = param_size(spec, "n", cfg.n);
  cfg.seed = parse_u64(spec.get("seed", "0"));
  cfg.gamma = param_double(spec, "gamma", cfg.gamma);
  cfg.horizon = param_size(spec, "horizon", cfg.horizon);
  return generate_gridworld(cfg);
}

TabularMdp make_chain_model(const ModelSpec& spec) {
  check_params(spec, {"states", "slip", "gamma", "horizon"});
  ChainConfig cfg;
  cfg.states = param_size(spec, "states", cfg.states);
  cfg.slip = param_double(spec, "slip", cfg.slip);
  cfg.gamma = param_double(spec, "gamma", cfg.gamma);
  cfg.horizon = param_size(spec, "horizon", cfg.horizon);
  return make_chain(cfg);
}

GameConfig make_game_config(const ModelSpec& spec) {
  check_params(spec, {"width", "height", "gamma"});
  GameConfig cfg;
  cfg.width = param_double(spec, "width", cfg.width);
  cfg.height = param_double(spec, "height", cfg.height);
  cfg.gamma = param_double(spec, "gamma", cfg.gamma);
  cfg.validate();
  return cfg;
}

/// Per-feature-index game table; the space hash is checked when present.
std::vector<double> load_game_table(const std::string& path) {
  IndexedTable table = read_indexed_table(path);
  FeatureSpace space = game_feature_space();
  if (table.has("space_hash") && parse_hash_hex(table.field("space_hash")) != space.hash())
    throw Error(Errc::incompatible_space, path + " was built for feature space " + table.field("space_hash") +
                                              ", expected " + space.hash_hex());
  if (table.values.size() != space.size())
    throw Error(Errc::invalid_argument, path + " has " + std::to_string(table.values.size()) +
                                            " entries, the game feature space " + std::to_string(space.size()));
  return table.values;
}

Eigen::VectorXd load_state_reward(const std::string& path, std::size_t states) {
  IndexedTable table = read_indexed_table(path);
  if (table.values.size() != states)
    throw Error(Errc::invalid_argument, path + " has " + std::to_string(table.values.size()) +
                                            " entries, the model " + std::to_string(states) + " states");
  return Eigen::Map<const Eigen::VectorXd>(table.values.data(), static_cast<Eigen::Index>(states));
}

IndexedTable vector_table(const Eigen::VectorXd& v) {
  IndexedTable t;
  t.values.assign(v.data(), v.data() + v.size());
  return t;
}

// --- bench gridworld -----------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> sizes{8};
  std::vector<std::size_t> trajs{100};
  std::size_t reps = 20;
  std::vector<std::string> algos{"pirl", "kpirl"};
  std::string kernel = "gaussian:0.6";
  double eps_fraction = 0.05;
  std::size_t max_iter = 50;
  double gamma = 0.9;
  std::size_t horizon = 100;
  bool gnuplot = false;
};

void bench_gridworld(const BenchOptions& o, const Common& c, Artifacts& art, std::ostream& out) {
  BenchmarkConfig cfg;
  cfg.algorithms.clear();
  for (const auto& a : o.algos) cfg.algorithms.push_back(parse_irl_algorithm(a));
  cfg.sizes = o.sizes;
  cfg.trajectory_counts = o.trajs;
  cfg.repetitions = o.reps;
  cfg.seed = require_seed(c, "bench gridworld");
  cfg.gamma = o.gamma;
  cfg.horizon = o.horizon;
  cfg.settings.kernel = KernelSpec::parse(o.kernel);
  cfg.settings.kpirl.epsilon_fraction = o.eps_fraction;
  cfg.settings.kpirl.max_iterations = o.max_iter;
  BenchmarkReport report = run_benchmark(cfg);

  const auto format = parse_report_format(c.format);
  const std::string name = format == ReportFormat::csv ? "report.csv" : "report.txt";
  {
    auto f = art.open(name);
    write_report(f, report, format);
  }
  art.nondeterministic(name, "runtime");
  {
    auto f = art.open("runs.csv");
    f << "algorithm,n,trajectories,repetition,percent_value_lost,runtime_seconds,iterations,failed,error\n";
    for (const auto& r : report.runs)
      f << to_string(r.algorithm) << ',' << r.n << ',' << r.trajectories << ',' << r.repetition << ','
        << format_double(r.value_lost) << ',' << format_double(r.runtime_seconds) << ',' << r.iterations
        << ',' << (r.failed ? 1 : 0) << ",\"" << escape(r.error) << "\"\n";
  }
  art.nondeterministic("runs.csv", "runtime_seconds");
  if (o.gnuplot) {
    auto f = art.open("report.dat");
    write_gnuplot_table(f, report);
    art.nondeterministic("report.dat", "runtime");
  }
  write_report(out, report, format);
}

// --- simulate gridworld ----------------------------------------------------------

void simulate_gridworld(const std::string& mdp, std::size_t trajs, const Common& c, Artifacts& art,
                        std::ostream& out) {
  ModelSpec spec = ModelSpec::parse(mdp);
  if (spec.name != "gridworld") throw Error(Errc::unsupported_model, "simulate gridworld needs a gridworld model");
  const std::uint64_t seed = require_seed(c, "simulate gridworld");
  Gridworld world = make_world(spec);
  ExpertData expert = simulate_expert(world, trajs, seed);
  {
    auto f = art.open("expert.txt");
    write_trajectories<StateIndex>(f, expert.trajectories, index_codec());
  }
  {
    auto f = art.open("world.txt");
    IndexedTable t = vector_table(world.mdp.reward());
    t.header = {{"model", mdp}};
    write_indexed_table(f, t);
  }
  out << "wrote " << trajs << " expert trajectories on a " << world.n << "x" << world.n << " gridworld\n";
}

// --- learn kpirl -------------------------------------------------------------------

struct LearnOptions {
  std::string mdp;
  std::string expert;
  std::string kernel;
  std::optional<double> eps;
  double eps_fraction = 0.05;
  std::size_t max_iter = 50;
  std::string solver;
  std::size_t iterations = 30, episodes = 25, steps = 20, window = 8, budget = 15000;
  std::size_t eval_episodes = 100;
};

DeiConfig dei_config(std::size_t I, std::size_t M, std::size_t T, std::size_t W, std::size_t budget) {
  DeiConfig cfg;
  cfg.iterations = I;
  cfg.episodes = M;
  cfg.steps = T;
  cfg.window = W;
  cfg.budget = budget;
  return cfg;
}

KpirlRun run_or_partial(const Eigen::VectorXd& mu, std::shared_ptr<const Kernel> kernel, RlSolver& solver,
                        const KpirlConfig& cfg) {
  try {
    return run_kpirl(mu, std::move(kernel), solver, cfg);
  } catch (const KpirlStagnation& e) {
    if (e.partial().iterations.empty()) throw;
    return e.partial();
  }
}

std::string_view to_string(KpirlStop stop) {
  switch (stop) {
    case KpirlStop::converged: return "converged";
    case KpirlStop::max_iterations: return "max-iterations";
    case KpirlStop::stagnated: return "stagnated";
  }
  return "unknown";
}

void write_learn_outputs(const KpirlRun& run, const std::shared_ptr<const Kernel>& kernel, const FeatureSpace& space,
                         Artifacts& art, Json& summary) {
  {
    auto f = art.open("run.txt");
    write_run_archive(f, run, kernel->spec());
  }
  const std::size_t selected = select_iteration(run, kernel->gram());
  KernelReward reward = select_reward(run, kernel);
  {
    auto f = art.open("reward.txt");
    IndexedTable t = vector_table(reward.values());
    t.header = {{"kernel", kernel->spec().to_string()},
                {"space_hash", space.hash_hex()},
                {"selected_iteration", std::to_string(selected + 1)}};
    write_indexed_table(f, t);
  }
  summary["iterations"] = run.iterations.size();
  summary["stop"] = std::string(to_string(run.stop));
  summary["epsilon"] = run.epsilon;
  summary["final_distance"] = run.final_distance();
  summary["selected_iteration"] = selected + 1;
  summary["mixture_weights"] = run.mixture_weights;
}

void learn_kpirl(const LearnOptions& o, const Common& c, Artifacts& art, std::ostream& out, std::ostream& err) {
  require_file(o.expert, "expert trajectories (--expert)");
  art.input(o.expert);
  ModelSpec spec = ModelSpec::parse(o.mdp);
  const std::uint64_t seed = require_seed(c, "learn kpirl");
  KpirlConfig kcfg;
  kcfg.epsilon = o.eps;
  kcfg.epsilon_fraction = o.eps_fraction;
  kcfg.max_iterations = o.max_iter;
  kcfg.seed = derive_seed(seed, 1);
  const DeiConfig dcfg = dei_config(o.iterations, o.episodes, o.steps, o.window, o.budget);
  Json summary = {{"model", o.mdp}};

  if (spec.name == "gridworld") {
    Gridworld world = make_world(spec);
    auto trajs = load_trajectories(o.expert, index_codec());
    for (const auto& t : trajs)
      for (StateIndex s : t.states)
        if (s >= world.num_states())
          throw Error(Errc::invalid_argument, "expert state " + std::to_string(s) + " outside the gridworld");
    auto mu = estimate_mu<StateIndex>(trajs, world.mdp.gamma(), ExpectationForm::visitation, world.space,
                                      [&](StateIndex s) { return grid_features(world.n, s); });
    const KernelSpec kspec = KernelSpec::parse(o.kernel.empty() ? "gaussian:0.6" : o.kernel);
    auto kernel = std::make_shared<const Kernel>(gram_matrix(kspec, world.space));
    const std::string solver = o.solver.empty() ? "exact" : o.solver;
    if (c.verbose) err << "learn kpirl: " << trajs.size() << " expert trajectories, solver " << solver << '\n';
    KpirlRun run;
    if (solver == "exact") {
      TabularExactSolver exact(world.mdp, world.feature_index, world.space.size());
      run = run_or_partial(mu.values, kernel, exact, kcfg);
    } else if (solver == "dei") {
      auto index = world.feature_index;
      DeiKpirlSolver<StateIndex> dei(tabular_dei_model(world.mdp.generative()),
                                     [index](const StateIndex& s) { return index[s]; }, world.space.size(), dcfg,
                                     o.eval_episodes, derive_seed(seed, 2));
      run = run_or_partial(mu.values, kernel, dei, kcfg);
    } else {
      throw Error(Errc::invalid_argument, "unknown solver '" + solver + "' (exact|dei)");
    }
    write_learn_outputs(run, kernel, world.space, art, summary);
    KernelReward reward = select_reward(run, kernel);
    Eigen::VectorXd state_reward(static_cast<Eigen::Index>(world.num_states()));
    for (StateIndex s = 0; s < world.num_states(); ++s)
      state_reward[static_cast<Eigen::Index>(s)] = reward.at(world.feature_index[s]);
    {
      auto f = art.open("state_reward.txt");
      write_indexed_table(f, vector_table(state_reward));
    }
    summary["percent_value_lost"] = percent_value_lost(world, state_reward);
  } else if (spec.name == "game") {
    GameConfig game = make_game_config(spec);
    auto trajs = load_trajectories(o.expert, game_codec());
    FeatureSpace space = game_feature_space();
    auto mu = estimate_mu<GameState>(trajs, game.gamma, ExpectationForm::visitation, space,
                                     [](const GameState& s) { return phi(s); });
    const KernelSpec kspec = KernelSpec::parse(o.kernel.empty() ? "game-gaussian:0.6" : o.kernel);
    if (c.verbose) err << "learn kpirl: building the " << space.size() << "-entry game kernel\n";
    auto kernel = std::make_shared<const Kernel>(gram_matrix(kspec, space));
    if (!o.solver.empty() && o.solver != "dei")
      throw Error(Errc::unsupported_model, "the game is only solved with dei");
    std::vector<GameState> starts;
    for (const auto& t : trajs) starts.insert(starts.end(), t.states.begin(), t.states.end());
    DeiKpirlSolver<GameState> dei(game_dei_model(game, unit_reward_table(), starts),
                                  [](const GameState& s) { return game_feature_index(s); }, space.size(), dcfg,
                                  o.eval_episodes, derive_seed(seed, 2));
    KpirlRun run = run_or_partial(mu.values, kernel, dei, kcfg);
    write_learn_outputs(run, kernel, space, art, summary);
  } else {
    throw Error(Errc::unsupported_model, "learn kpirl supports gridworld and game, not '" + spec.name + "'");
  }
  {
    auto f = art.open("summary.json");
    f << summary.dump(2) << '\n';
  }
  out << summary.dump(2) << '\n';
}

// --- solve dei ---------------------------------------------------------------------

struct SolveOptions {
  std::string mdp;
  std::string reward;
  std::size_t iterations = 30, episodes = 25, steps = 20, window = 8, budget = 15000;
  std::string stepsize = "harmonic";
  double harmonic_a = 10.0;
  std::optional<double> ucb;
  std::size_t eval_episodes = 200;
};

template <class State>
void write_dei_outputs(const DeiResult<State>& result, const DiscountedMdp<State>& mdp, const Common& c,
                       std::uint64_t seed, std::size_t eval_episodes, Artifacts& art, Json& summary) {
  const bool csv = c.format == "csv";
  {
    auto f = art.open(csv ? "iterations.csv" : "iterations.txt");
    f << (csv ? "iteration,mean_return\n" : "# iteration mean_return\n");
    for (std::size_t i = 0; i < result.iteration_returns.size(); ++i)
      f << i + 1 << (csv ? ',' : ' ') << format_double(result.iteration_returns[i]) << '\n';
  }
  if (result.q) {
    auto f = art.open(csv ? "q.csv" : "q.txt");
    f << (csv ? "key,count,value\n" : "# key count value\n");
    for (const auto& [key, cell] : result.q->cells())
      f << key << (csv ? ',' : ' ') << cell.count << (csv ? ',' : ' ') << format_double(cell.mean) << '\n';
  }
  auto value = policy_value_mc(mdp, *result.policy, eval_episodes, derive_seed(seed, 9));
  summary["iterations_completed"] = result.iterations_completed;
  summary["truncated"] = result.truncated;
  summary["steps_used"] = result.steps_used;
  summary["observations"] = result.observations;
  summary["value_mc"] = {{"mean", value.mean}, {"standard_error", value.standard_error}, {"episodes", eval_episodes}};
}

void solve_tabular(const TabularMdp& mdp, const DeiConfig& cfg, const SolveOptions& o, const Common& c,
                   std::uint64_t seed, Artifacts& art, Json& summary) {
  auto result = run_dei(tabular_dei_model(mdp.generative()), cfg, seed);
  write_dei_outputs(result, mdp.generative(), c, seed, o.eval_episodes, art, summary);
  TabularPolicy pi = tabularize(*result.policy, mdp.num_states());
  auto actions = pi.actions();
  {
    auto f = art.open("policy.txt");
    IndexedTable t;
    t.header = {{"model", o.mdp}, {"actions", std::to_string(mdp.num_actions())}};
    t.values.assign(actions.begin(), actions.end());
    write_indexed_table(f, t);
  }
  TabularSolution best = value_iteration(mdp);
  summary["value_exact"] = expected_value(mdp, pi);
  summary["value_optimal"] = expected_value(mdp, best.policy);
}

void solve_dei(const SolveOptions& o, const Common& c, Artifacts& art, std::ostream& out) {
  ModelSpec spec = ModelSpec::parse(o.mdp);
  const std::uint64_t seed = require_seed(c, "solve dei");
  DeiConfig cfg = dei_config(o.iterations, o.episodes, o.steps, o.window, o.budget);
  if (o.stepsize == "harmonic") {
    cfg.stepsize.rule = StepsizeRule::harmonic;
  } else if (o.stepsize == "sample-average") {
    cfg.stepsize.rule = StepsizeRule::sample_average;
  } else {
    throw Error(Errc::invalid_argument, "unknown stepsize rule '" + o.stepsize + "'");
  }
  cfg.stepsize.harmonic_a = o.harmonic_a;
  cfg.ucb = o.ucb;
  cfg.validate();
  if (!o.reward.empty()) {
    require_file(o.reward, "reward table (--reward)");
    art.input(o.reward);
  }
  Json summary = {{"model", o.mdp}};

  if (spec.name == "chain" || spec.name == "gridworld") {
    TabularMdp mdp = spec.name == "chain" ? make_chain_model(spec) : make_world(spec).mdp;
    if (!o.reward.empty()) mdp = mdp.with_reward(load_state_reward(o.reward, mdp.num_states()));
    solve_tabular(mdp, cfg, o, c, seed, art, summary);
  } else if (spec.name == "cartpole") {
    check_params(spec, {"horizon", "gamma"});
    if (!o.reward.empty()) throw Error(Errc::unsupported_model, "cartpole has a fixed reward");
    CartpoleConfig cc;
    cc.horizon = param_size(spec, "horizon", cc.horizon);
    cc.gamma = param_double(spec, "gamma", cc.gamma);
    auto model = cartpole_model(cc);
    auto result = run_dei(model, cfg, seed);
    write_dei_outputs(result, model.mdp, c, seed, o.eval_episodes, art, summary);
  } else if (spec.name == "game") {
    GameConfig game = make_game_config(spec);
    auto table = o.reward.empty() ? unit_reward_table() : load_game_table(o.reward);
    auto model = game_dei_model(game, table);
    auto result = run_dei(model, cfg, seed);
    write_dei_outputs(result, model.mdp, c, seed, o.eval_episodes, art, summary);
  } else {
    throw Error(Errc::unsupported_model, "unknown model '" + spec.name + "' (chain|gridworld|cartpole|game)");
  }
  {
    auto f = art.open("summary.json");
    f << summary.dump(2) << '\n';
  }
  out << summary.dump(2) << '\n';
}

// --- export treatment ----------------------------------------------------------------

Json client_fixtures(const Treatment& treatment, std::size_t count, std::uint64_t seed) {
  GameConfig game;
  ChasePolicy chase(game);
  auto codec = game_codec();
  Json states = Json::array();
  for (std::uint64_t g = 0; states.size() < count; ++g) {
    GameRun run = simulate_game(game, chase, derive_seed(seed, g));
    for (const auto& s : run.trajectory.states) {
      if (states.size() >= count) break;
      Json targets = Json::array();
      for (std::size_t k = 0; k < s.targets.size(); ++k) {
        FeatureVector f = display_phi(s, k);
        std::size_t index = game_feature_index(f);
        double value = treatment.values[index];
        targets.push_back({{"phi", f}, {"index", index}, {"value", value},
                           {"fill", fill_fraction(value, treatment.ceiling)}});
      }
      states.push_back({{"state", codec.encode(s)}, {"targets", targets}});
    }
  }
  Json smoothing = Json::array();
  Rng rng(derive_seed(seed, 0xfeed));
  for (int k = 0; k < 20; ++k) {
    std::vector<double> inputs, outputs;
    SmoothingState state;
    for (int t = 0; t < 30; ++t) {
      double r = treatment.ceiling * 1.2 * uniform01(rng);
      inputs.push_back(r);
      outputs.push_back(state.update(r));
    }
    smoothing.push_back({{"inputs", inputs}, {"outputs", outputs}});
  }
  return {{"space_hash", hash_hex(treatment.space_hash)},
          {"ceiling", treatment.ceiling},
          {"alpha", SmoothingState::kAlpha},
          {"states", states},
          {"smoothing", smoothing}};
}

void export_treatment_cmd(const std::string& reward, bool control, std::size_t fixtures, const Common& c,
                          Artifacts& art, std::ostream& out) {
  FeatureSpace space = game_feature_space();
  Treatment treatment;
  if (control == !reward.empty())
    throw Error(Errc::missing_input, "export treatment needs exactly one of --reward or --control");
  if (control) {
    treatment = control_treatment(space, kNoTouchIndex);
  } else {
    require_file(reward, "reward table (--reward)");
    art.input(reward);
    IndexedTable t = read_indexed_table(reward);
    std::vector<double> values = load_game_table(reward);
    RewardTable table = build_reward_table(std::move(values), kNoTouchIndex, space,
                                           t.has("kernel") ? t.field("kernel") : "unknown", file_hash(reward));
    treatment = to_treatment(table);
    auto f = art.open("table.csv");
    f << "index,raw,shifted,clipped\n";
    for (std::size_t i = 0; i < table.raw.size(); ++i)
      f << i << ',' << format_double(table.raw[i]) << ',' << format_double(table.shifted[i]) << ','
        << format_double(table.clipped[i]) << '\n';
  }
  {
    auto f = art.open("treatment.txt");
    export_treatment(f, treatment);
  }
  if (fixtures > 0) {
    auto f = art.open("fixtures.json");
    f << client_fixtures(treatment, fixtures, require_seed(c, "export treatment --fixtures")).dump() << '\n';
  }
  out << "treatment kernel=" << treatment.kernel << " ceiling=" << format_double(treatment.ceiling)
      << " entries=" << treatment.values.size() << " space_hash=" << hash_hex(treatment.space_hash) << '\n';
}

// --- simulate game -----------------------------------------------------------------------

void simulate_game_cmd(const std::string& policy_name, std::size_t games, bool expectations, const Common& c,
                       Artifacts& art, std::ostream& out) {
  const std::uint64_t seed = require_seed(c, "simulate game");
  GameConfig game;
  std::unique_ptr<StationaryPolicy<GameState>> policy;
  if (policy_name == "chase") {
    policy = std::make_unique<ChasePolicy>(game);
  } else if (policy_name == "random") {
    policy = std::make_unique<UniformRandomPolicy<GameState>>(game.num_actions());
  } else if (policy_name == "still") {
    const ActionIndex zero = zero_action(game);
    policy = std::make_unique<FunctionPolicy<GameState>>(game.num_actions(), [zero](const GameState&) { return zero; });
  } else {
    throw Error(Errc::invalid_argument, "unknown game policy '" + policy_name + "' (chase|random|still)");
  }
  auto runs = simulate_games(game, *policy, games, seed);
  std::vector<Trajectory<GameState>> trajs;
  for (const auto& r : runs) trajs.push_back(r.trajectory);
  {
    auto f = art.open("trajectories.txt");
    write_trajectories<GameState>(f, trajs, game_codec());
  }
  const bool csv = c.format == "csv";
  {
    auto f = art.open(csv ? "games.csv" : "games.txt");
    f << (csv ? "game,seed,observations,spawns,touches\n" : "# game seed observations spawns touches\n");
    const char sep = csv ? ',' : ' ';
    for (std::size_t g = 0; g < runs.size(); ++g)
      f << g << sep << runs[g].trajectory.seed << sep << runs[g].trajectory.size() << sep << runs[g].spawns << sep
        << runs[g].touches << '\n';
  }
  double spawns = 0.0, touches = 0.0;
  for (const auto& r : runs) {
    spawns += static_cast<double>(r.spawns);
    touches += static_cast<double>(r.touches);
  }
  if (expectations) {
    auto f = art.open("expectations.txt");
    auto e = expert_fixture_check(trajs, game.gamma);
    f << "# policy T*Xp T*Yp T*Vm T*Vd T*Am 1-T\n" << policy_name;
    for (double v : e) f << ' ' << format_double(v);
    f << '\n';
    for (const auto& row : published_feature_expectations()) {
      f << "published:" << row.policy;
      for (double v : row.values) f << ' ' << format_double(v);
      f << '\n';
    }
  }
  out << games << " games, mean spawns " << format_double(spawns / static_cast<double>(games))
      << ", mean touches " << format_double(touches / static_cast<double>(games)) << '\n';
}

// --- serve -------------------------------------------------------------------------------

void serve_cmd(const std::string& service_path, const std::string& host, int port, const std::string& store,
               double duration, const Common& c, Artifacts& art, std::ostream& out) {
  require_file(service_path, "service config (--service)");
  art.input(service_path);
  std::ifstream in(service_path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(Errc::service_config, service_path + ": " + e.what());
  }
  ServiceConfig cfg = service_config_from_json(j, fs::path(service_path).parent_path());
  // --seed overrides the file; one of the two must be given.
  if (c.seed) cfg.seed = *c.seed;
  else if (!j.contains("seed")) throw UsageError("serve needs --seed or a \"seed\" key in the service config");
  if (!store.empty()) cfg.store = store;
  SessionService service(cfg);
  HttpFrontend http(service);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = http.bind(host, port);
  art.extra()["listen"] = {{"host", host}, {"port", bound}};
  art.extra()["store"] = cfg.store.string();
  Json arms = Json::array();
  for (const auto& arm : cfg.arms) arms.push_back(arm.name);
  art.extra()["arms"] = arms;
  art.finish();
  out << "listening on http://" << host << ':' << bound << " arms=" << arms.dump() << std::endl;

  std::thread server([&] { http.listen(); });
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration);
  for (;;) {
    timespec tick{0, 200'000'000};
    if (sigtimedwait(&signals, nullptr, &tick) > 0) break;
    if (duration > 0.0 && std::chrono::steady_clock::now() >= deadline) break;
  }
  http.stop();
  server.join();
  out << "stopped; " << service.session_count() << " sessions\n";
}

}  // namespace

// --- helpers exposed for tests -------------------------------------------------------------

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec spec;
  auto colon = text.find(':');
  spec.name = std::string(text.substr(0, colon));
  if (spec.name.empty()) throw Error(Errc::invalid_argument, "empty model name");
  if (colon == std::string_view::npos) return spec;
  for (auto part : split(text.substr(colon + 1), ',')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw Error(Errc::invalid_argument, "model parameter '" + std::string(part) + "' is not key=value");
    spec.params[std::string(part.substr(0, eq))] = std::string(part.substr(eq + 1));
  }
  return spec;
}

std::string ModelSpec::get(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string IndexedTable::field(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  throw Error(Errc::invalid_argument, "table has no '" + key + "' field");
}

bool IndexedTable::has(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return true;
  return false;
}

IndexedTable read_indexed_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_input, "cannot read " + path);
  IndexedTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto space = line.find(' ');
    std::string key = line.substr(0, space);
    std::string value = space == std::string::npos ? "" : line.substr(space + 1);
    const bool numeric = !key.empty() && std::all_of(key.begin(), key.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
    if (!numeric) {
      if (!table.values.empty())
        throw Error(Errc::invalid_argument, path + ":" + std::to_string(line_no) + ": header after data rows");
      table.header.emplace_back(key, value);
      continue;
    }
    if (parse_u64(key) != table.values.size())
      throw Error(Errc::invalid_argument, path + ":" + std::to_string(line_no) + ": rows must count up from 0");
    table.values.push_back(parse_double(value));
  }
  if (table.has("count") && parse_u64(table.field("count")) != table.values.size())
    throw Error(Errc::invalid_argument, path + ": count does not match the rows");
  return table;
}

void write_indexed_table(std::ostream& out, const IndexedTable& table) {
  for (const auto& [k, v] : table.header)
    if (k != "count") out << k << ' ' << v << '\n';
  out << "count " << table.values.size() << '\n';
  for (std::size_t i = 0; i < table.values.size(); ++i) out << i << ' ' << format_double(table.values[i]) << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"irlkit: kernel IRL toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);

  Common common;
  BenchOptions bench;
  LearnOptions learn;
  SolveOptions solve;
  std::string sim_mdp = "gridworld:n=8";
  std::size_t sim_trajs = 100;
  std::string export_reward;
  bool export_control = false;
  std::size_t export_fixtures = 0;
  std::string game_policy = "chase";
  std::size_t games = 1;
  bool game_expectations = false;
  std::string service_path, host = "127.0.0.1", store;
  int port = 8080;
  double duration = 0.0;

  auto group = [&](const char* name, const char* help) {
    auto* g = app.add_subcommand(name, help);
    g->require_subcommand(1, 1);
    return g;
  };

  auto* bench_cmd = group("bench", "Benchmarks")->add_subcommand("gridworld", "PIRL vs KPIRL value-loss sweep");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--sizes", bench.sizes, "Grid sizes")->delimiter(',');
  bench_cmd->add_option("--trajs", bench.trajs, "Expert trajectory counts")->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Worlds per cell");
  bench_cmd->add_option("--algos", bench.algos, "Algorithms (pirl,kpirl)")->delimiter(',');
  bench_cmd->add_option("--kernel", bench.kernel, "KPIRL kernel");
  bench_cmd->add_option("--eps-fraction", bench.eps_fraction, "Stop at this fraction of ||mu_E||_K");
  bench_cmd->add_option("--max-iter", bench.max_iter, "Projection iterations");
  bench_cmd->add_option("--gamma", bench.gamma, "Discount");
  bench_cmd->add_option("--horizon", bench.horizon, "Ticks per episode");
  bench_cmd->add_flag("--gnuplot", bench.gnuplot, "Also write report.dat");

  auto* learn_cmd = group("learn", "Inverse RL")->add_subcommand("kpirl", "Kernel projection IRL");
  add_common(learn_cmd, common);
  learn_cmd->add_option("--mdp", learn.mdp, "gridworld:n=..,seed=.. | game")->required();
  learn_cmd->add_option("--expert", learn.expert, "Expert trajectory file");
  learn_cmd->add_option("--kernel", learn.kernel, "dot | gaussian:<bw> | game-gaussian:<bw>");
  learn_cmd->add_option("--eps", learn.eps, "Absolute stopping distance");
  learn_cmd->add_option("--eps-fraction", learn.eps_fraction, "Stopping distance as a fraction of ||mu_E||_K");
  learn_cmd->add_option("--max-iter", learn.max_iter, "Projection iterations");
  learn_cmd->add_option("--solver", learn.solver, "exact | dei");
  learn_cmd->add_option("-I", learn.iterations, "DEI iterations");
  learn_cmd->add_option("-M", learn.episodes, "DEI episodes per iteration");
  learn_cmd->add_option("-T", learn.steps, "DEI episode length");
  learn_cmd->add_option("-W", learn.window, "DEI window");
  learn_cmd->add_option("--budget", learn.budget, "DEI simulator steps per solve");
  learn_cmd->add_option("--eval-episodes", learn.eval_episodes, "Rollouts per visitation estimate");

  auto* solve_cmd = group("solve", "Forward RL")->add_subcommand("dei", "Direct estimate iteration");
  add_common(solve_cmd, common);
  solve_cmd->add_option("--mdp", solve.mdp, "chain | gridworld:.. | cartpole | game")->required();
  solve_cmd->add_option("--reward", solve.reward, "Per-state (tabular) or per-feature (game) table");
  solve_cmd->add_option("-I", solve.iterations, "Iterations");
  solve_cmd->add_option("-M", solve.episodes, "Episodes per iteration");
  solve_cmd->add_option("-T", solve.steps, "Episode length");
  solve_cmd->add_option("-W", solve.window, "Window");
  solve_cmd->add_option("--budget", solve.budget, "Simulator steps");
  solve_cmd->add_option("--stepsize", solve.stepsize, "harmonic | sample-average");
  solve_cmd->add_option("--harmonic-a", solve.harmonic_a, "Harmonic stepsize constant");
  solve_cmd->add_option("--ucb", solve.ucb, "UCB coefficient for the first action");
  solve_cmd->add_option("--eval-episodes", solve.eval_episodes, "Rollouts for the value estimate");

  auto* export_cmd = group("export", "Artifacts")->add_subcommand("treatment", "Reward table -> treatment file");
  add_common(export_cmd, common);
  export_cmd->add_option("--reward", export_reward, "reward.txt from learn kpirl --mdp game");
  export_cmd->add_flag("--control", export_control, "Unit-reward control treatment");
  export_cmd->add_option("--fixtures", export_fixtures, "States in the client fixture corpus (0 = none)");

  auto* simulate = group("simulate", "Simulators");
  auto* game_cmd = simulate->add_subcommand("game", "Target-touch game");
  add_common(game_cmd, common);
  game_cmd->add_option("--policy", game_policy, "chase | random | still");
  game_cmd->add_option("--games", games, "Games to play");
  game_cmd->add_flag("--expectations", game_expectations, "Feature expectations next to the published rows");
  auto* grid_cmd = simulate->add_subcommand("gridworld", "Expert demonstrations on a gridworld");
  add_common(grid_cmd, common);
  grid_cmd->add_option("--mdp", sim_mdp, "gridworld:n=..,seed=..");
  grid_cmd->add_option("--trajs", sim_trajs, "Trajectories");

  auto* serve = app.add_subcommand("serve", "Session service");
  add_common(serve, common);
  serve->add_option("--service", service_path, "Service JSON (arms, store, thresholds)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 = ephemeral)");
  serve->add_option("--store", store, "Store directory override");
  serve->add_option("--duration", duration, "Stop after this many seconds (0 = until signalled)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  CLI::App* leaf = nullptr;
  std::string command;
  for (CLI::App* a = &app; !a->get_subcommands().empty();) {
    a = a->get_subcommands().front();
    command += (command.empty() ? "" : " ") + a->get_name();
    leaf = a;
  }

  try {
    if (!common.config.empty()) apply_config(leaf, common.config);
    if (common.format != "text" && common.format != "csv") throw UsageError("--format must be text or csv");
    if (common.threads < 0) throw UsageError("--threads must be >= 0");
    if (common.threads > 0) omp_set_num_threads(common.threads);

    Artifacts art(common, command, argc, argv);
    art.options(leaf);
    if (leaf == bench_cmd) bench_gridworld(bench, common, art, out);
    else if (leaf == learn_cmd) learn_kpirl(learn, common, art, out, err);
    else if (leaf == solve_cmd) solve_dei(solve, common, art, out);
    else if (leaf == export_cmd) export_treatment_cmd(export_reward, export_control, export_fixtures, common, art, out);
    else if (leaf == game_cmd) simulate_game_cmd(game_policy, games, game_expectations, common, art, out);
    else if (leaf == grid_cmd) simulate_gridworld(sim_mdp, sim_trajs, common, art, out);
    else if (leaf == serve) {
      serve_cmd(service_path, host, port, store, duration, common, art, out);
      return 0;
    }
    art.finish();
    return 0;
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace irl::cli
