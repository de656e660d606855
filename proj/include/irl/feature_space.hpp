#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irl/mdp.hpp"

namespace irl {

using FeatureVector = std::vector<double>;

std::string format_feature(const FeatureVector& v);

/// Finite image of a feature map: the columns of Phi in lexicographic order,
/// plus the index n(phi) used to build one-hot visitation vectors.
class FeatureSpace {
 public:
  static constexpr std::size_t kDefaultCapacity = 1u << 16;

  /// Deduplicates and sorts. Throws capacity if more than `capacity` distinct
  /// vectors are seen.
  static FeatureSpace build(std::span<const FeatureVector> vectors,
                            std::size_t capacity = kDefaultCapacity);

  std::size_t size() const { return vectors_.size(); }
  std::size_t dimension() const { return dimension_; }
  const FeatureVector& vector(std::size_t index) const { return vectors_[index]; }
  const std::vector<FeatureVector>& vectors() const { return vectors_; }

  std::optional<std::size_t> find(const FeatureVector& v) const;
  /// Throws unknown_feature naming the vector.
  std::size_t index_of(const FeatureVector& v) const;

  /// k x N matrix Phi.
  const Eigen::MatrixXd& matrix() const { return phi_; }

  /// "<index> <v_1> ... <v_k>" per line; the hash is FNV-1a over this text.
  std::string export_text() const;
  std::uint64_t hash() const { return hash_; }
  std::string hash_hex() const;

 private:
  std::vector<FeatureVector> vectors_;
  std::map<FeatureVector, std::size_t> index_;
  Eigen::MatrixXd phi_;
  std::size_t dimension_ = 0;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a64(std::string_view text);

/// Builds a space by scanning every state of every trajectory.
template <class State, class FeatureMap>
FeatureSpace scan_feature_space(std::span<const Trajectory<State>> trajectories,
                                FeatureMap&& phi,
                                std::size_t capacity = FeatureSpace::kDefaultCapacity) {
  std::map<FeatureVector, bool> seen;
  for (const auto& traj : trajectories)
    for (const auto& s : traj.states) {
      seen.emplace(phi(s), true);
      if (seen.size() > capacity)
        throw Error(Errc::capacity, "feature image exceeds capacity " + std::to_string(capacity));
    }
  std::vector<FeatureVector> vectors;
  vectors.reserve(seen.size());
  for (auto& [v, _] : seen) vectors.push_back(v);
  return FeatureSpace::build(vectors, capacity);
}

enum class ExpectationForm { feature, visitation };

struct FeatureExpectation {
  Eigen::VectorXd values;
  ExpectationForm form = ExpectationForm::visitation;
  double gamma = 0.0;
  std::size_t samples = 0;
};

/// (1/M) sum_m sum_t gamma^(t-1) e_(n_t) for pre-indexed trajectories.
Eigen::VectorXd visitation_from_indices(std::span<const std::vector<std::size_t>> indexed,
                                        double gamma, std::size_t num_features);

/// Empirical feature expectation. The feature form is computed as
/// Phi * (visitation form), which makes the two forms consistent exactly.
template <class State, class FeatureMap>
FeatureExpectation estimate_mu(std::span<const Trajectory<State>> trajectories,
                               double gamma, ExpectationForm form,
                               const FeatureSpace& space, FeatureMap&& phi) {
  if (trajectories.empty())
    throw Error(Errc::invalid_argument, "need at least one trajectory");
  std::vector<std::vector<std::size_t>> indexed;
  indexed.reserve(trajectories.size());
  for (const auto& traj : trajectories) {
    std::vector<std::size_t> idx;
    idx.reserve(traj.size());
    for (const auto& s : traj.states) idx.push_back(space.index_of(phi(s)));
    indexed.push_back(std::move(idx));
  }
  FeatureExpectation mu;
  mu.form = form;
  mu.gamma = gamma;
  mu.samples = trajectories.size();
  mu.values = visitation_from_indices(indexed, gamma, space.size());
  if (form == ExpectationForm::feature) mu.values = space.matrix() * mu.values;
  return mu;
}

// --- Kernels ---------------------------------------------------------------

enum class KernelKind { dot_product, gaussian, game_gaussian, explicit_matrix };

/// Kernel selection as written on the command line: "dot", "gaussian:0.6",
/// "game-gaussian:0.6". Gaussian convention: exp(-d^2 / (2 sigma^2)).
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double bandwidth = 0.6;

  static KernelSpec parse(std::string_view text);
  std::string to_string() const;
};

double kernel_value(const KernelSpec& spec, const FeatureVector& a, const FeatureVector& b);

/// Distance used inside the game kernel. Touch vectors are embedded on a
/// sphere (each binned coordinate scaled to [0, 1] and placed on an arc, the
/// direction bin on a full circle), and the no-touch vector sits on the axis
/// through the sphere's centre, at distance 1 from every touch vector. The
/// embedding is Euclidean, so the Gaussian built on it is positive definite.
double game_kernel_distance(const FeatureVector& a, const FeatureVector& b);

/// Embedding used by game_kernel_distance; exposed for tests.
Eigen::VectorXd game_kernel_embedding(const FeatureVector& phi);

/// Gram matrix K(Phi, Phi) with its recorded PSD check.
class Kernel {
 public:
  /// Symmetric with minimum eigenvalue >= -1e-8, otherwise indefinite_kernel.
  Kernel(KernelSpec spec, Eigen::MatrixXd gram);

  /// Arbitrary PSD matrix (tests, PIRL cross-checks).
  static Kernel from_matrix(Eigen::MatrixXd gram);

  const KernelSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  std::size_t size() const { return static_cast<std::size_t>(gram_.rows()); }
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  KernelSpec spec_;
  Eigen::MatrixXd gram_;
  double min_eigenvalue_ = 0.0;
};

inline constexpr double kPsdTolerance = 1e-8;

/// Row-parallel Gram construction (OpenMP) followed by the PSD check.
Kernel gram_matrix(const KernelSpec& spec, const FeatureSpace& space);

/// Serial double loop over all (i, j); the reference the parallel kernel is
/// tested against.
Eigen::MatrixXd gram_matrix_reference(const KernelSpec& spec, const FeatureSpace& space);

/// Unchecked parallel fill of K; gram_matrix adds the PSD check on top.
Eigen::MatrixXd gram_entries(const KernelSpec& spec, const FeatureSpace& space);

/// sqrt(max(0, x^T K x)).
double k_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& gram);
inline double k_norm(const Eigen::VectorXd& x, const Kernel& kernel) {
  return k_norm(x, kernel.gram());
}

}  // namespace irl
