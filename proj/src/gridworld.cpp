#include "irl/gridworld.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <optional>

#include "irl/trajectory_io.hpp"

namespace irl {

StateIndex grid_state(std::size_t n, std::size_t row, std::size_t col) {
  if (row < 1 || row > n || col < 1 || col > n)
    throw Error(Errc::invalid_argument, "grid cell out of range");
  return (row - 1) * n + (col - 1);
}

StateIndex grid_move(std::size_t n, StateIndex s, ActionIndex a) {
  std::size_t row = s / n, col = s % n;
  switch (static_cast<GridAction>(a)) {
    case GridAction::up: if (row > 0) --row; break;
    case GridAction::down: if (row + 1 < n) ++row; break;
    case GridAction::left: if (col > 0) --col; break;
    case GridAction::right: if (col + 1 < n) ++col; break;
    case GridAction::stay: break;
    default: throw Error(Errc::invalid_argument, "grid action out of range");
  }
  return row * n + col;
}

FeatureVector grid_features(std::size_t n, StateIndex s) {
  const std::size_t row = s / n + 1, col = s % n + 1;
  FeatureVector f(2 * n, 0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    f[j - 1] = j >= row ? 1.0 : 0.0;
    f[n + j - 1] = j >= col ? 1.0 : 0.0;
  }
  return f;
}

Gridworld gridworld_with_reward(std::size_t n, Eigen::VectorXd reward, double gamma,
                                std::size_t horizon) {
  if (n < 2) throw Error(Errc::invalid_argument, "gridworld needs n >= 2");
  const std::size_t states = n * n;
  if (static_cast<std::size_t>(reward.size()) != states)
    throw Error(Errc::invalid_argument, "gridworld reward needs n^2 entries");
  std::vector<std::vector<Transition>> succ(states * kGridActions);
  for (StateIndex s = 0; s < states; ++s)
    for (ActionIndex a = 0; a < kGridActions; ++a)
      succ[s * kGridActions + a] = {{grid_move(n, s, a), 1.0}};
  Eigen::VectorXd initial =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(states), 1.0 / static_cast<double>(states));

  std::vector<FeatureVector> features;
  features.reserve(states);
  for (StateIndex s = 0; s < states; ++s) features.push_back(grid_features(n, s));
  FeatureSpace space = FeatureSpace::build(features);
  std::vector<std::size_t> index;
  index.reserve(states);
  for (const auto& f : features) index.push_back(space.index_of(f));

  return Gridworld{n,
                   TabularMdp(states, kGridActions, std::move(succ), std::move(initial),
                              std::move(reward), gamma, horizon),
                   std::move(space), std::move(index)};
}

Gridworld generate_gridworld(const GridworldConfig& config) {
  Rng rng(config.seed);
  Eigen::VectorXd reward(static_cast<Eigen::Index>(config.n * config.n));
  for (auto& r : reward) r = std::pow(uniform01(rng), 8);
  return gridworld_with_reward(config.n, std::move(reward), config.gamma, config.horizon);
}

ExpertData simulate_expert(const Gridworld& world, std::size_t trajectories, std::uint64_t seed) {
  if (trajectories < 1) throw Error(Errc::invalid_argument, "need at least one expert trajectory");
  TabularSolution sol = value_iteration(world.mdp);
  auto gen = world.mdp.generative();
  auto trajs = sample_trajectories(gen, sol.policy, trajectories, seed);
  for (auto& t : trajs) t.source = TrajectorySource::expert;
  return {std::move(sol.policy), std::move(trajs)};
}

double percent_value_lost(const Gridworld& world, const Eigen::VectorXd& learned_reward) {
  if (static_cast<std::size_t>(learned_reward.size()) != world.num_states())
    throw Error(Errc::invalid_argument, "learned reward needs one value per state");
  double v_star = expected_value(world.mdp, optimal_uniform_ties(world.mdp));
  if (!(v_star > 1e-12))
    throw Error(Errc::degenerate_world, "optimal value " + format_double(v_star) + " is not positive");
  double v_learned = expected_value(world.mdp, optimal_uniform_ties(world.mdp.with_reward(learned_reward)));
  double lost = 100.0 * (v_star - v_learned) / v_star;
  return std::clamp(lost, 0.0, 100.0);
}

std::string_view to_string(IrlAlgorithm algo) {
  return algo == IrlAlgorithm::pirl ? "pirl" : "kpirl";
}

IrlAlgorithm parse_irl_algorithm(std::string_view text) {
  if (text == "pirl") return IrlAlgorithm::pirl;
  if (text == "kpirl") return IrlAlgorithm::kpirl;
  throw Error(Errc::invalid_argument, "unknown algorithm '" + std::string(text) + "'");
}

LearnedReward learn_gridworld_reward(const Gridworld& world,
                                     std::span<const Trajectory<StateIndex>> expert,
                                     IrlAlgorithm algo, const IrlSettings& settings) {
  KernelSpec spec = algo == IrlAlgorithm::pirl ? KernelSpec{KernelKind::dot_product, 0.0}
                                               : settings.kernel;
  auto kernel = std::make_shared<const Kernel>(gram_matrix(spec, world.space));
  const auto& index = world.feature_index;
  auto mu = estimate_mu(expert, world.mdp.gamma(), ExpectationForm::visitation, world.space,
                        [&](StateIndex s) { return grid_features(world.n, s); });
  TabularExactSolver solver(world.mdp, index, world.space.size());

  LearnedReward out;
  try {
    out.run = run_kpirl(mu.values, kernel, solver, settings.kpirl);
  } catch (const KpirlStagnation& e) {
    out.run = e.partial();
    out.stagnated = true;
  }
  KernelReward reward = select_reward(out.run, kernel);
  out.state_reward = solver.state_reward(reward);
  return out;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  if (config.algorithms.empty() || config.sizes.empty() || config.trajectory_counts.empty() ||
      config.repetitions < 1)
    throw Error(Errc::invalid_argument, "benchmark needs algorithms, sizes, counts and reps >= 1");

  struct Cell {
    std::size_t n, m, rep;
  };
  std::vector<Cell> cells;
  for (auto n : config.sizes)
    for (auto m : config.trajectory_counts)
      for (std::size_t r = 0; r < config.repetitions; ++r) cells.push_back({n, m, r});

  const std::size_t algos = config.algorithms.size();
  std::vector<BenchmarkRun> runs(cells.size() * algos);
  const auto count = static_cast<std::int64_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < count; ++c) {
    const Cell cell = cells[static_cast<std::size_t>(c)];
    const std::uint64_t world_seed = derive_seed(config.seed, cell.n, cell.rep);
    std::optional<Gridworld> world;
    std::optional<ExpertData> expert;
    std::string setup_error;
    try {
      world.emplace(generate_gridworld({cell.n, world_seed, config.gamma, config.horizon}));
      expert.emplace(simulate_expert(*world, cell.m, derive_seed(world_seed, cell.m, 1)));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t a = 0; a < algos; ++a) {
      BenchmarkRun& run = runs[static_cast<std::size_t>(c) * algos + a];
      run.algorithm = config.algorithms[a];
      run.n = cell.n;
      run.trajectories = cell.m;
      run.repetition = cell.rep;
      if (!expert) {
        run.failed = true;
        run.error = setup_error;
        continue;
      }
      auto start = std::chrono::steady_clock::now();
      try {
        IrlSettings settings = config.settings;
        settings.kpirl.seed = derive_seed(world_seed, cell.m, 2);
        LearnedReward learned =
            learn_gridworld_reward(*world, expert->trajectories, run.algorithm, settings);
        run.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.value_lost = percent_value_lost(*world, learned.state_reward);
        run.iterations = learned.run.iterations.size();
      } catch (const std::exception& e) {
        run.failed = true;
        run.error = e.what();
      }
    }
  }

  BenchmarkReport report;
  report.gamma = config.gamma;
  report.horizon = config.horizon;
  report.runs = runs;
  for (auto algo : config.algorithms)
    for (auto n : config.sizes)
      for (auto m : config.trajectory_counts) {
        BenchmarkRow row{algo, n, m, 0.0, 0.0, 0, 0};
        for (const auto& r : runs) {
          if (r.algorithm != algo || r.n != n || r.trajectories != m) continue;
          if (r.failed) {
            ++row.failures;
            continue;
          }
          row.mean_value_lost += r.value_lost;
          row.mean_runtime_seconds += r.runtime_seconds;
          ++row.runs;
        }
        if (row.runs > 0) {
          row.mean_value_lost /= static_cast<double>(row.runs);
          row.mean_runtime_seconds /= static_cast<double>(row.runs);
        }
        report.rows.push_back(row);
      }
  return report;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text") return ReportFormat::text;
  if (text == "csv") return ReportFormat::csv;
  throw Error(Errc::invalid_argument, "unknown report format '" + std::string(text) + "'");
}

void write_report(std::ostream& out, const BenchmarkReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    out << "algorithm,n,trajectories,mean_percent_value_lost,mean_runtime_seconds,runs,failures\n";
    for (const auto& r : report.rows)
      out << to_string(r.algorithm) << ',' << r.n << ',' << r.trajectories << ','
          << format_double(r.mean_value_lost) << ',' << format_double(r.mean_runtime_seconds)
          << ',' << r.runs << ',' << r.failures << '\n';
    return;
  }
  out << "# gamma=" << format_double(report.gamma) << " horizon=" << report.horizon << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %4s %6s %12s %12s %5s %5s\n", "algo", "n", "M",
                "value_lost%", "runtime_s", "runs", "fail");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-6s %4zu %6zu %12.4f %12.4f %5zu %5zu\n",
                  std::string(to_string(r.algorithm)).c_str(), r.n, r.trajectories,
                  r.mean_value_lost, r.mean_runtime_seconds, r.runs, r.failures);
    out << line;
  }
}

void write_gnuplot_table(std::ostream& out, const BenchmarkReport& report) {
  std::map<std::string, std::vector<const BenchmarkRow*>> blocks;
  for (const auto& r : report.rows) blocks[std::string(to_string(r.algorithm))].push_back(&r);
  for (const auto& [name, rows] : blocks) {
    out << "# " << name << "\n# n M value_lost runtime\n";
    for (const auto* r : rows)
      out << r->n << ' ' << r->trajectories << ' ' << format_double(r->mean_value_lost) << ' '
          << format_double(r->mean_runtime_seconds) << '\n';
    out << "\n\n";
  }
}

}  // namespace irl
