#include "irl/feature_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "irl/trajectory_io.hpp"

namespace irl {

std::string format_feature(const FeatureVector& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out + "]";
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureSpace FeatureSpace::build(std::span<const FeatureVector> vectors,
                                 std::size_t capacity) {
  FeatureSpace space;
  std::map<FeatureVector, std::size_t> unique;
  for (const auto& v : vectors) {
    if (!unique.empty() && v.size() != unique.begin()->first.size())
      throw Error(Errc::invalid_argument, "feature vectors differ in dimension");
    unique.emplace(v, 0);
    if (unique.size() > capacity)
      throw Error(Errc::capacity, "feature image exceeds capacity " + std::to_string(capacity));
  }
  if (unique.empty()) throw Error(Errc::invalid_argument, "empty feature image");
  std::size_t i = 0;
  for (auto& [v, idx] : unique) {
    idx = i++;
    space.vectors_.push_back(v);
  }
  space.index_ = std::move(unique);
  space.dimension_ = space.vectors_.front().size();
  space.phi_.resize(static_cast<Eigen::Index>(space.dimension_),
                    static_cast<Eigen::Index>(space.vectors_.size()));
  for (std::size_t j = 0; j < space.vectors_.size(); ++j)
    for (std::size_t r = 0; r < space.dimension_; ++r)
      space.phi_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = space.vectors_[j][r];
  space.hash_ = fnv1a64(space.export_text());
  return space;
}

std::optional<std::size_t> FeatureSpace::find(const FeatureVector& v) const {
  auto it = index_.find(v);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureSpace::index_of(const FeatureVector& v) const {
  auto it = index_.find(v);
  if (it == index_.end())
    throw Error(Errc::unknown_feature, "feature vector " + format_feature(v) +
                                           " is not in the feature space");
  return it->second;
}

std::string FeatureSpace::export_text() const {
  std::string out;
  for (std::size_t j = 0; j < vectors_.size(); ++j) {
    out += std::to_string(j);
    for (double x : vectors_[j]) {
      out += ' ';
      out += format_double(x);
    }
    out += '\n';
  }
  return out;
}

std::string FeatureSpace::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

Eigen::VectorXd visitation_from_indices(std::span<const std::vector<std::size_t>> indexed,
                                        double gamma, std::size_t num_features) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features));
  for (const auto& traj : indexed) {
    double discount = 1.0;
    for (std::size_t idx : traj) {
      mu[static_cast<Eigen::Index>(idx)] += discount;
      discount *= gamma;
    }
  }
  return mu / static_cast<double>(indexed.size());
}

KernelSpec KernelSpec::parse(std::string_view text) {
  KernelSpec spec;
  auto colon = text.find(':');
  std::string_view name = text.substr(0, colon);
  if (name == "dot" || name == "dot-product" || name == "linear") {
    spec.kind = KernelKind::dot_product;
    spec.bandwidth = 0.0;
    return spec;
  }
  if (name == "gaussian") spec.kind = KernelKind::gaussian;
  else if (name == "game-gaussian") spec.kind = KernelKind::game_gaussian;
  else throw Error(Errc::invalid_argument, "unknown kernel '" + std::string(text) + "'");
  if (colon != std::string_view::npos) spec.bandwidth = parse_double(text.substr(colon + 1));
  if (!(spec.bandwidth > 0.0))
    throw Error(Errc::invalid_argument, "kernel bandwidth must be positive");
  return spec;
}

std::string KernelSpec::to_string() const {
  switch (kind) {
    case KernelKind::dot_product: return "dot";
    case KernelKind::gaussian: return "gaussian:" + format_double(bandwidth);
    case KernelKind::game_gaussian: return "game-gaussian:" + format_double(bandwidth);
    case KernelKind::explicit_matrix: return "explicit";
  }
  return "unknown";
}

namespace {

// Game feature layout: [1-T, T*Xp, T*Yp, T*Vm, T*Vd, T*Am].
constexpr double kArcRadius = 0.45;
constexpr double kArcSpan = std::numbers::pi / 2.0;
constexpr int kDirectionBins = 8;
// One direction-bin step has chord length 1/8.
const double kCircleRadius = (1.0 / kDirectionBins) / (2.0 * std::sin(std::numbers::pi / kDirectionBins));
const double kSphereRadiusSq = 4.0 * kArcRadius * kArcRadius + kCircleRadius * kCircleRadius;
const double kNoTouchHeight = std::sqrt(1.0 - kSphereRadiusSq);

bool is_integer_in(double x, int lo, int hi) {
  return x == std::floor(x) && x >= lo && x <= hi;
}

}  // namespace

Eigen::VectorXd game_kernel_embedding(const FeatureVector& phi) {
  if (phi.size() != 6)
    throw Error(Errc::invalid_argument, "game kernel expects 6-dim feature vectors");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(11);
  if (phi[0] == 1.0) {
    for (std::size_t i = 1; i < 6; ++i)
      if (phi[i] != 0.0)
        throw Error(Errc::invalid_argument, "no-touch vector must be [1 0 0 0 0 0]");
    e[10] = kNoTouchHeight;
    return e;
  }
  if (phi[0] != 0.0 || !is_integer_in(phi[1], 0, 2) || !is_integer_in(phi[2], 0, 2) ||
      !is_integer_in(phi[3], 0, 7) || !is_integer_in(phi[4], 0, 7) ||
      !is_integer_in(phi[5], 0, 5))
    throw Error(Errc::invalid_argument, "not a game feature vector: " + format_feature(phi));
  const double scaled[4] = {phi[1] / 3.0, phi[2] / 3.0, phi[3] / 8.0, phi[5] / 6.0};
  for (int i = 0; i < 4; ++i) {
    e[2 * i] = kArcRadius * std::cos(scaled[i] * kArcSpan);
    e[2 * i + 1] = kArcRadius * std::sin(scaled[i] * kArcSpan);
  }
  double angle = 2.0 * std::numbers::pi * phi[4] / kDirectionBins;
  e[8] = kCircleRadius * std::cos(angle);
  e[9] = kCircleRadius * std::sin(angle);
  return e;
}

double game_kernel_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a == b) {
    game_kernel_embedding(a);  // validates
    return 0.0;
  }
  return (game_kernel_embedding(a) - game_kernel_embedding(b)).norm();
}

double kernel_value(const KernelSpec& spec, const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) throw Error(Errc::invalid_argument, "dimension mismatch");
  switch (spec.kind) {
    case KernelKind::dot_product: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    }
    case KernelKind::gaussian: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
      return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
    }
    case KernelKind::game_gaussian: {
      double d = game_kernel_distance(a, b);
      return std::exp(-d * d / (2.0 * spec.bandwidth * spec.bandwidth));
    }
    case KernelKind::explicit_matrix: break;
  }
  throw Error(Errc::invalid_argument, "kernel has no closed form");
}

Kernel::Kernel(KernelSpec spec, Eigen::MatrixXd gram)
    : spec_(spec), gram_(std::move(gram)) {
  if (gram_.rows() != gram_.cols() || gram_.rows() == 0)
    throw Error(Errc::invalid_argument, "Gram matrix must be square and non-empty");
  double asym = (gram_ - gram_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, gram_.cwiseAbs().maxCoeff()))
    throw Error(Errc::indefinite_kernel, "Gram matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_, Eigen::EigenvaluesOnly);
  min_eigenvalue_ = eig.eigenvalues()(0);
  if (min_eigenvalue_ < -kPsdTolerance)
    throw Error(Errc::indefinite_kernel,
                "Gram matrix has eigenvalue " + format_double(min_eigenvalue_));
}

Kernel Kernel::from_matrix(Eigen::MatrixXd gram) {
  KernelSpec spec;
  spec.kind = KernelKind::explicit_matrix;
  spec.bandwidth = 0.0;
  return Kernel(spec, std::move(gram));
}

namespace {

// The game kernel evaluates embeddings once per column instead of per entry.
Eigen::MatrixXd game_embeddings(const FeatureSpace& space) {
  Eigen::MatrixXd emb(11, static_cast<Eigen::Index>(space.size()));
  for (std::size_t j = 0; j < space.size(); ++j)
    emb.col(static_cast<Eigen::Index>(j)) = game_kernel_embedding(space.vector(j));
  return emb;
}

}  // namespace

Eigen::MatrixXd gram_entries(const KernelSpec& spec, const FeatureSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.size());
  Eigen::MatrixXd k(n, n);
  const Eigen::MatrixXd& phi = space.matrix();
  Eigen::MatrixXd emb;
  if (spec.kind == KernelKind::game_gaussian) emb = game_embeddings(space);
  const double scale = spec.kind == KernelKind::dot_product
                           ? 0.0
                           : 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  // Column-major storage: fill column j; symmetry makes it row j of K too.
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      switch (spec.kind) {
        case KernelKind::dot_product:
          k(i, j) = phi.col(i).dot(phi.col(j));
          break;
        case KernelKind::gaussian:
          k(i, j) = i == j ? 1.0 : std::exp(-(phi.col(i) - phi.col(j)).squaredNorm() * scale);
          break;
        case KernelKind::game_gaussian:
          k(i, j) = i == j ? 1.0 : std::exp(-(emb.col(i) - emb.col(j)).squaredNorm() * scale);
          break;
        case KernelKind::explicit_matrix:
          break;
      }
    }
  }
  if (spec.kind == KernelKind::explicit_matrix)
    throw Error(Errc::invalid_argument, "explicit kernels carry their own matrix");
  return k;
}

Kernel gram_matrix(const KernelSpec& spec, const FeatureSpace& space) {
  return Kernel(spec, gram_entries(spec, space));
}

Eigen::MatrixXd gram_matrix_reference(const KernelSpec& spec, const FeatureSpace& space) {
  const std::size_t n = space.size();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel_value(spec, space.vector(i), space.vector(j));
  return k;
}

double k_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& gram) {
  if (x.size() != gram.rows())
    throw Error(Errc::invalid_argument, "k_norm: dimension mismatch (" +
                                            std::to_string(x.size()) + " vs " +
                                            std::to_string(gram.rows()) + ")");
  double q = x.dot(gram * x);
  return std::sqrt(std::max(0.0, q));
}

}  // namespace irl
