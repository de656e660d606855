#include "irl/mdp.hpp"

#include <cmath>

namespace irl {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::environment_fault: return "environment-fault";
    case Errc::unsupported_model: return "unsupported-model";
    case Errc::capacity: return "capacity";
    case Errc::unknown_feature: return "unknown-feature";
    case Errc::indefinite_kernel: return "indefinite-kernel";
    case Errc::stagnation: return "stagnation";
    case Errc::solver_failure: return "solver-failure";
    case Errc::degenerate_world: return "degenerate-world";
    case Errc::degenerate_treatment: return "degenerate-treatment";
    case Errc::incompatible_space: return "incompatible-space";
    case Errc::service_config: return "service-config";
    case Errc::missing_input: return "missing-input";
    case Errc::io: return "io";
  }
  return "unknown";
}

std::string_view to_string(TrajectorySource source) {
  switch (source) {
    case TrajectorySource::expert: return "expert";
    case TrajectorySource::simulated: return "simulated";
    case TrajectorySource::human: return "human";
  }
  return "simulated";
}

TrajectorySource parse_trajectory_source(std::string_view text) {
  if (text == "expert") return TrajectorySource::expert;
  if (text == "simulated") return TrajectorySource::simulated;
  if (text == "human") return TrajectorySource::human;
  throw Error(Errc::invalid_argument, "unknown trajectory source '" + std::string(text) + "'");
}

ValueEstimate summarize_returns(std::span<const double> returns) {
  ValueEstimate est;
  est.episodes = returns.size();
  if (returns.empty()) return est;
  double sum = 0.0;
  for (double r : returns) sum += r;
  est.mean = sum / static_cast<double>(returns.size());
  if (returns.size() > 1) {
    double ss = 0.0;
    for (double r : returns) ss += (r - est.mean) * (r - est.mean);
    double var = ss / static_cast<double>(returns.size() - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(returns.size()));
  }
  return est;
}

}  // namespace irl
