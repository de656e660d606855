#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "irl/feature_space.hpp"
#include "irl/kpirl.hpp"
#include "irl/tabular.hpp"

namespace irl {

// State s = (row - 1) * n + (col - 1), rows and columns 1-based.
// Actions: up, down, left, right, stay. Moves off the grid stay put.
enum class GridAction : ActionIndex { up = 0, down = 1, left = 2, right = 3, stay = 4 };
inline constexpr std::size_t kGridActions = 5;

struct GridworldConfig {
  std::size_t n = 8;
  std::uint64_t seed = 0;
  double gamma = 0.9;
  std::size_t horizon = 100;
};

struct Gridworld {
  std::size_t n = 0;
  /// Dynamics with the true reward, uniform initial distribution.
  TabularMdp mdp;
  FeatureSpace space;
  /// n(phi(s)) per state.
  std::vector<std::size_t> feature_index;

  std::size_t num_states() const { return n * n; }
};

StateIndex grid_state(std::size_t n, std::size_t row, std::size_t col);
StateIndex grid_move(std::size_t n, StateIndex s, ActionIndex a);

/// Entry j (1-based, j <= n) is 1 iff j >= row; entry n + j is 1 iff j >= col.
FeatureVector grid_features(std::size_t n, StateIndex s);

/// Reward u^8, u ~ U(0, 1), one draw per state in state order.
Gridworld generate_gridworld(const GridworldConfig& config);
Gridworld gridworld_with_reward(std::size_t n, Eigen::VectorXd reward, double gamma,
                                std::size_t horizon);

struct ExpertData {
  TabularPolicy policy;
  std::vector<Trajectory<StateIndex>> trajectories;
};

/// Optimal policy for the true reward, rolled out M times from uniform starts.
ExpertData simulate_expert(const Gridworld& world, std::size_t trajectories, std::uint64_t seed);

/// 100 (V* - V^(pi_L)) / V*, evaluated exactly on the true reward; pi_L is
/// the optimal policy for the learned per-state reward, ties split uniformly.
double percent_value_lost(const Gridworld& world, const Eigen::VectorXd& learned_reward);

enum class IrlAlgorithm { pirl, kpirl };
std::string_view to_string(IrlAlgorithm algo);
IrlAlgorithm parse_irl_algorithm(std::string_view text);

struct IrlSettings {
  /// Kernel used by the kpirl algorithm; pirl always uses the dot product.
  KernelSpec kernel{KernelKind::gaussian, 0.6};
  KpirlConfig kpirl;
};

struct LearnedReward {
  Eigen::VectorXd state_reward;
  KpirlRun run;
  bool stagnated = false;
};

/// Expert mu from trajectories, exact inner solver, selected iteration reward.
LearnedReward learn_gridworld_reward(const Gridworld& world,
                                     std::span<const Trajectory<StateIndex>> expert,
                                     IrlAlgorithm algo, const IrlSettings& settings);

struct BenchmarkConfig {
  std::vector<IrlAlgorithm> algorithms{IrlAlgorithm::pirl, IrlAlgorithm::kpirl};
  std::vector<std::size_t> sizes{8};
  std::vector<std::size_t> trajectory_counts{100};
  std::size_t repetitions = 20;
  std::uint64_t seed = 0;
  double gamma = 0.9;
  std::size_t horizon = 100;
  IrlSettings settings;
};

struct BenchmarkRun {
  IrlAlgorithm algorithm = IrlAlgorithm::pirl;
  std::size_t n = 0;
  std::size_t trajectories = 0;
  std::size_t repetition = 0;
  double value_lost = 0.0;
  double runtime_seconds = 0.0;
  std::size_t iterations = 0;
  bool failed = false;
  std::string error;
};

struct BenchmarkRow {
  IrlAlgorithm algorithm = IrlAlgorithm::pirl;
  std::size_t n = 0;
  std::size_t trajectories = 0;
  double mean_value_lost = 0.0;
  double mean_runtime_seconds = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
};

struct BenchmarkReport {
  double gamma = 0.9;
  std::size_t horizon = 100;
  std::vector<BenchmarkRun> runs;
  std::vector<BenchmarkRow> rows;
};

/// Every (n, M, repetition) world is shared by all algorithms. Worlds run in
/// parallel; a failing run is recorded and excluded from the means.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

enum class ReportFormat { text, csv };
ReportFormat parse_report_format(std::string_view text);

void write_report(std::ostream& out, const BenchmarkReport& report, ReportFormat format);
/// Whitespace-separated columns, one block per algorithm, for gnuplot.
void write_gnuplot_table(std::ostream& out, const BenchmarkReport& report);

}  // namespace irl
