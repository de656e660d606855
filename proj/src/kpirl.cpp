#include "irl/kpirl.hpp"

#include <algorithm>
#include <cmath>

#include "irl/trajectory_io.hpp"

namespace irl {

KernelReward::KernelReward(Eigen::VectorXd alpha, std::shared_ptr<const Kernel> kernel)
    : alpha_(std::move(alpha)), kernel_(std::move(kernel)) {
  if (!kernel_) throw Error(Errc::invalid_argument, "kernel reward needs a kernel");
  if (static_cast<std::size_t>(alpha_.size()) != kernel_->size())
    throw Error(Errc::invalid_argument, "alpha dimension " + std::to_string(alpha_.size()) +
                                            " does not match kernel size " +
                                            std::to_string(kernel_->size()));
  values_ = kernel_->gram().transpose() * alpha_;
  normalized_ = norm() <= 1.0 + 1e-12;
}

KernelReward reward_from_alpha(Eigen::VectorXd alpha, std::shared_ptr<const Kernel> kernel) {
  return KernelReward(std::move(alpha), std::move(kernel));
}

ProjectionResult projection_step(const Eigen::VectorXd& mu_bar_prev,
                                 const Eigen::VectorXd& mu_i,
                                 const Eigen::VectorXd& mu_expert,
                                 const Eigen::MatrixXd& gram) {
  Eigen::VectorXd step = mu_i - mu_bar_prev;
  Eigen::VectorXd k_step = gram * step;
  double denom = step.dot(k_step);
  if (!(denom > 1e-12))
    throw Error(Errc::stagnation, "projection denominator vanished: new policy repeats the running estimate");
  ProjectionResult out;
  out.kappa_raw = k_step.dot(mu_expert - mu_bar_prev) / denom;
  out.kappa = std::clamp(out.kappa_raw, 0.0, 1.0);
  out.mu_bar = mu_bar_prev + out.kappa * step;
  return out;
}

namespace {

PolicyOutcome solve_checked(RlSolver& solver, const KernelReward& reward,
                            std::size_t iteration, std::size_t n) {
  PolicyOutcome outcome;
  try {
    outcome = solver.solve(reward);
  } catch (const std::exception& e) {
    throw Error(Errc::solver_failure,
                "rl solver failed at iteration " + std::to_string(iteration) + ": " + e.what());
  }
  if (static_cast<std::size_t>(outcome.visitation.size()) != n)
    throw Error(Errc::solver_failure, "rl solver returned a visitation vector of the wrong size at iteration " +
                                          std::to_string(iteration));
  return outcome;
}

}  // namespace

KpirlRun run_kpirl(const Eigen::VectorXd& expert_mu, std::shared_ptr<const Kernel> kernel,
                   RlSolver& solver, const KpirlConfig& config) {
  if (!kernel) throw Error(Errc::invalid_argument, "kpirl needs a kernel");
  const auto n = static_cast<std::size_t>(kernel->size());
  if (static_cast<std::size_t>(expert_mu.size()) != n)
    throw Error(Errc::invalid_argument, "expert expectation does not match the feature space");
  if (config.max_iterations < 1)
    throw Error(Errc::invalid_argument, "max_iterations must be >= 1");
  const Eigen::MatrixXd& gram = kernel->gram();

  KpirlRun run;
  run.expert_mu = expert_mu;
  run.epsilon = config.epsilon ? *config.epsilon
                               : config.epsilon_fraction * k_norm(expert_mu, gram);
  if (run.epsilon < 0.0) throw Error(Errc::invalid_argument, "epsilon must be >= 0");

  // Random first reward, unit kernel norm.
  Rng rng(config.seed);
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(n));
  for (auto& a : alpha) a = standard_normal(rng);
  double alpha_norm = k_norm(alpha, gram);
  if (alpha_norm > 1e-12) alpha /= alpha_norm;

  {
    KernelReward reward(alpha, kernel);
    PolicyOutcome outcome = solve_checked(solver, reward, 1, n);
    KpirlIteration it;
    it.alpha = alpha;
    it.policy_id = outcome.policy_id;
    it.mu = outcome.visitation;
    it.mu_bar = outcome.visitation;
    it.distance = k_norm(expert_mu - it.mu_bar, gram);
    run.iterations.push_back(std::move(it));
    run.mixture_weights.push_back(1.0);
  }

  while (run.iterations.back().distance > run.epsilon) {
    if (run.iterations.size() >= config.max_iterations) {
      run.stop = KpirlStop::max_iterations;
      return run;
    }
    const std::size_t i = run.iterations.size() + 1;
    const Eigen::VectorXd& mu_bar_prev = run.iterations.back().mu_bar;
    KpirlIteration it;
    it.alpha = expert_mu - mu_bar_prev;
    KernelReward reward(it.alpha, kernel);
    PolicyOutcome outcome = solve_checked(solver, reward, i, n);
    it.policy_id = outcome.policy_id;
    it.mu = outcome.visitation;

    ProjectionResult proj;
    try {
      proj = projection_step(mu_bar_prev, it.mu, expert_mu, gram);
    } catch (const Error& e) {
      run.stop = KpirlStop::stagnated;
      throw KpirlStagnation("iteration " + std::to_string(i) + ": " + e.what(), run);
    }
    it.kappa_raw = proj.kappa_raw;
    it.kappa = proj.kappa;
    it.mu_bar = std::move(proj.mu_bar);
    it.distance = k_norm(expert_mu - it.mu_bar, gram);
    for (double& w : run.mixture_weights) w *= 1.0 - it.kappa;
    run.mixture_weights.push_back(it.kappa);
    run.iterations.push_back(std::move(it));
  }
  run.stop = KpirlStop::converged;
  return run;
}

std::size_t select_iteration(const KpirlRun& run, const Eigen::MatrixXd& gram) {
  if (run.iterations.empty())
    throw Error(Errc::invalid_argument, "cannot select a reward from an empty run");
  std::size_t best = 0;
  double best_dist = k_norm(run.expert_mu - run.iterations[0].mu, gram);
  for (std::size_t i = 1; i < run.iterations.size(); ++i) {
    double d = k_norm(run.expert_mu - run.iterations[i].mu, gram);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

KernelReward select_reward(const KpirlRun& run, std::shared_ptr<const Kernel> kernel) {
  if (!kernel) throw Error(Errc::invalid_argument, "select_reward needs a kernel");
  std::size_t i = select_iteration(run, kernel->gram());
  return KernelReward(run.iterations[i].alpha, std::move(kernel));
}

void write_run_archive(std::ostream& out, const KpirlRun& run, const KernelSpec& spec) {
  out << "# kernel=" << spec.to_string() << " epsilon=" << format_double(run.epsilon)
      << " n=" << run.expert_mu.size() << " stop="
      << (run.stop == KpirlStop::converged    ? "converged"
          : run.stop == KpirlStop::stagnated ? "stagnated"
                                             : "max-iterations")
      << '\n';
  out << "# iteration kappa_raw kappa distance policy_id weight alpha...\n";
  for (std::size_t i = 0; i < run.iterations.size(); ++i) {
    const auto& it = run.iterations[i];
    out << (i + 1) << ' ' << format_double(it.kappa_raw) << ' ' << format_double(it.kappa)
        << ' ' << format_double(it.distance) << ' ' << it.policy_id << ' '
        << format_double(i < run.mixture_weights.size() ? run.mixture_weights[i] : 0.0);
    for (double a : it.alpha) out << ' ' << format_double(a);
    out << '\n';
  }
}

TabularExactSolver::TabularExactSolver(TabularMdp dynamics,
                                       std::vector<std::size_t> feature_index,
                                       std::size_t num_features)
    : dynamics_(std::move(dynamics)),
      feature_index_(std::move(feature_index)),
      num_features_(num_features) {
  if (feature_index_.size() != dynamics_.num_states())
    throw Error(Errc::invalid_argument, "need one feature index per state");
  for (auto idx : feature_index_)
    if (idx >= num_features_) throw Error(Errc::invalid_argument, "feature index out of range");
}

Eigen::VectorXd TabularExactSolver::state_reward(const KernelReward& reward) const {
  if (reward.size() != num_features_)
    throw Error(Errc::invalid_argument, "reward dimension does not match feature space");
  Eigen::VectorXd r(static_cast<Eigen::Index>(feature_index_.size()));
  for (std::size_t s = 0; s < feature_index_.size(); ++s)
    r[static_cast<Eigen::Index>(s)] = reward.at(feature_index_[s]);
  return r;
}

PolicyOutcome TabularExactSolver::solve(const KernelReward& reward) {
  TabularMdp mdp = dynamics_.with_reward(state_reward(reward));
  TabularSolution sol = value_iteration(mdp);
  PolicyOutcome out;
  out.visitation = visitation_expectation(mdp, sol.policy, feature_index_, num_features_);
  out.policy_id = policies_.size();
  policies_.push_back(std::move(sol.policy));
  return out;
}

}  // namespace irl
