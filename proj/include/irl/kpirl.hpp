#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "irl/feature_space.hpp"
#include "irl/tabular.hpp"

namespace irl {

/// R_alpha(s) = alpha^T K e_hat(s). The per-index table K^T alpha is computed
/// once; evaluation is a lookup at n(phi(s)).
class KernelReward {
 public:
  KernelReward(Eigen::VectorXd alpha, std::shared_ptr<const Kernel> kernel);

  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& values() const { return values_; }
  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  double at(std::size_t feature_index) const {
    return values_[static_cast<Eigen::Index>(feature_index)];
  }
  double norm() const { return k_norm(alpha_, *kernel_); }
  /// True when constructed with ||alpha||_{2,k} <= 1 (within 1e-12).
  bool normalized() const { return normalized_; }

 private:
  Eigen::VectorXd alpha_;
  std::shared_ptr<const Kernel> kernel_;
  Eigen::VectorXd values_;
  bool normalized_ = false;
};

KernelReward reward_from_alpha(Eigen::VectorXd alpha, std::shared_ptr<const Kernel> kernel);

/// What the inner RL step hands back to the projection loop.
struct PolicyOutcome {
  std::size_t policy_id = 0;
  /// State-visitation expectation mu_e_hat of the solved policy.
  Eigen::VectorXd visitation;
};

/// Solves the forward problem for a reward and reports the solved policy's
/// state-visitation expectation. Implementations keep the policies they
/// produce, indexed by policy_id.
class RlSolver {
 public:
  virtual ~RlSolver() = default;
  virtual PolicyOutcome solve(const KernelReward& reward) = 0;
};

struct KpirlConfig {
  /// Absolute tolerance in kernel-norm units; when empty, epsilon_fraction
  /// times ||mu_E||_{2,k}.
  std::optional<double> epsilon;
  double epsilon_fraction = 0.05;
  std::size_t max_iterations = 50;
  std::uint64_t seed = 0;
};

struct KpirlIteration {
  Eigen::VectorXd alpha;
  std::size_t policy_id = 0;
  Eigen::VectorXd mu;      // mu_i of the solved policy
  Eigen::VectorXd mu_bar;  // running projection after this iteration
  double kappa_raw = 1.0;
  double kappa = 1.0;
  double distance = 0.0;   // ||mu_E - mu_bar_i||_{2,k}
};

enum class KpirlStop { converged, max_iterations, stagnated };

struct KpirlRun {
  double epsilon = 0.0;
  Eigen::VectorXd expert_mu;
  std::vector<KpirlIteration> iterations;
  /// Convex weights over iterations' policies; sum_j w_j mu_j = final mu_bar.
  std::vector<double> mixture_weights;
  KpirlStop stop = KpirlStop::max_iterations;

  bool converged() const { return stop == KpirlStop::converged; }
  double final_distance() const { return iterations.back().distance; }
};

/// Raised when mu_i coincides with mu_bar_(i-1); carries the run so far.
class KpirlStagnation : public Error {
 public:
  KpirlStagnation(const std::string& message, KpirlRun partial)
      : Error(Errc::stagnation, message), partial_(std::move(partial)) {}

  const KpirlRun& partial() const { return partial_; }

 private:
  KpirlRun partial_;
};

struct ProjectionResult {
  double kappa_raw = 0.0;
  double kappa = 0.0;
  Eigen::VectorXd mu_bar;
};

/// kappa = (mu_i - mu_bar)^T K (mu_E - mu_bar) / (mu_i - mu_bar)^T K (mu_i - mu_bar),
/// clamped to [0, 1]; mu_bar' = mu_bar + kappa (mu_i - mu_bar). Throws
/// stagnation when the denominator is <= 1e-12.
ProjectionResult projection_step(const Eigen::VectorXd& mu_bar_prev,
                                 const Eigen::VectorXd& mu_i,
                                 const Eigen::VectorXd& mu_expert,
                                 const Eigen::MatrixXd& gram);

/// The projection loop. The first reward is random: alpha_1 ~ N(0, I),
/// scaled to unit kernel norm.
KpirlRun run_kpirl(const Eigen::VectorXd& expert_mu, std::shared_ptr<const Kernel> kernel,
                   RlSolver& solver, const KpirlConfig& config);

/// Iteration reward whose own mu_i is closest to mu_E; earliest on ties.
KernelReward select_reward(const KpirlRun& run, std::shared_ptr<const Kernel> kernel);
std::size_t select_iteration(const KpirlRun& run, const Eigen::MatrixXd& gram);

/// One line per iteration: "iteration kappa_raw kappa distance policy_id alpha...".
void write_run_archive(std::ostream& out, const KpirlRun& run, const KernelSpec& spec);

/// Value iteration on R_alpha plus exact state-visitation propagation.
class TabularExactSolver final : public RlSolver {
 public:
  TabularExactSolver(TabularMdp dynamics, std::vector<std::size_t> feature_index,
                     std::size_t num_features);

  PolicyOutcome solve(const KernelReward& reward) override;

  const std::vector<TabularPolicy>& policies() const { return policies_; }
  const TabularMdp& dynamics() const { return dynamics_; }
  Eigen::VectorXd state_reward(const KernelReward& reward) const;

 private:
  TabularMdp dynamics_;
  std::vector<std::size_t> feature_index_;
  std::size_t num_features_;
  std::vector<TabularPolicy> policies_;
};

}  // namespace irl
