#include "irl/dei.hpp"

#include <algorithm>

namespace irl {

std::vector<double> windowed_returns(std::span<const double> rewards, std::size_t window) {
  if (window < 1) throw Error(Errc::invalid_argument, "window must be >= 1");
  if (window > rewards.size())
    throw Error(Errc::invalid_argument, "window " + std::to_string(window) +
                                            " exceeds reward sequence of length " +
                                            std::to_string(rewards.size()));
  std::vector<double> out;
  out.reserve(rewards.size() - window + 1);
  for (std::size_t w = 0; w + window <= rewards.size(); ++w) {
    double sum = 0.0;
    for (std::size_t t = 0; t < window; ++t) sum += rewards[w + t];
    out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

void QEstimate::add(std::uint64_t key, double value) {
  if (!std::isfinite(value)) throw Error(Errc::invalid_argument, "non-finite Q observation");
  Cell& cell = cells_[key];
  ++cell.count;
  cell.mean += stepsize_.weight(cell.count) * (value - cell.mean);
  double delta = value - cell.welford_mean;
  cell.welford_mean += delta / static_cast<double>(cell.count);
  cell.m2 += delta * (value - cell.welford_mean);
  total_ += value;
  ++total_count_;
}

double QEstimate::value(std::uint64_t key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? global_mean() : it->second.mean;
}

std::size_t QEstimate::count(std::uint64_t key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? 0 : it->second.count;
}

std::vector<std::pair<std::uint64_t, QEstimate::Cell>> QEstimate::cells() const {
  std::vector<std::pair<std::uint64_t, Cell>> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

double QEstimate::stddev(std::uint64_t key) const {
  auto it = cells_.find(key);
  if (it == cells_.end() || it->second.count < 2) return 0.0;
  return std::sqrt(it->second.m2 / static_cast<double>(it->second.count - 1));
}

QEstimate fit_q(std::span<const Observation> observations, StepsizeSpec stepsize) {
  QEstimate q(stepsize);
  for (const auto& o : observations) q.add(o.key, o.value);
  return q;
}

ActionIndex argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::invalid_argument, "empty action set");
  ActionIndex best = 0;
  for (ActionIndex a = 1; a < values.size(); ++a)
    if (values[a] > values[best]) best = a;
  return best;
}

ActionIndex ucb_initial_action(std::span<const double> means, std::span<const double> stds,
                               std::span<const std::size_t> counts, double c) {
  if (c < 0.0) throw Error(Errc::invalid_argument, "ucb coefficient must be >= 0");
  if (means.size() != stds.size() || means.size() != counts.size())
    throw Error(Errc::invalid_argument, "ucb inputs differ in length");
  std::vector<double> score(means.size());
  for (std::size_t a = 0; a < means.size(); ++a)
    score[a] = counts[a] == 0 ? std::numeric_limits<double>::infinity()
                              : means[a] + c * stds[a] / std::sqrt(static_cast<double>(counts[a]));
  return argmax_lowest(score);
}

void DeiConfig::validate() const {
  if (iterations < 1 || episodes < 1) throw Error(Errc::invalid_argument, "dei needs I, M >= 1");
  if (window < 1 || window > steps)
    throw Error(Errc::invalid_argument, "dei needs 1 <= W <= T");
  if (budget < episodes * steps)
    throw Error(Errc::invalid_argument, "interaction budget " + std::to_string(budget) +
                                            " is below M*T = " + std::to_string(episodes * steps));
  if (ucb && *ucb < 0.0) throw Error(Errc::invalid_argument, "ucb coefficient must be >= 0");
}

TabularPolicy tabularize(const StationaryPolicy<StateIndex>& policy, std::size_t states) {
  const std::size_t actions = policy.num_actions();
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions));
  std::vector<double> row(actions);
  for (StateIndex s = 0; s < states; ++s) {
    policy.probabilities(s, row);
    for (std::size_t a = 0; a < actions; ++a)
      probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = row[a];
  }
  return TabularPolicy(std::move(probs));
}

}  // namespace irl
