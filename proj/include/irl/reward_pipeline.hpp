#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "irl/feature_space.hpp"
#include "irl/kpirl.hpp"

namespace irl {

/// One value per feature index.
std::vector<double> tabulate(const KernelReward& reward, const FeatureSpace& space);

/// Every entry minus raw[no_touch]; the no-touch entry becomes exactly 0.
std::vector<double> shift_no_touch(std::span<const double> raw, std::size_t no_touch);

/// Nearest-rank percentile: the ceil(p n / 100)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, unsigned percent);

struct ClipResult {
  std::vector<double> values;
  double ceiling = 0.0;
};

/// Negatives to 0, then everything above the 97th percentile of the touch
/// entries (no-touch excluded) down to that ceiling.
ClipResult clip(std::span<const double> shifted, std::size_t no_touch);

struct RewardTable {
  std::vector<double> raw;
  std::vector<double> shifted;
  std::vector<double> clipped;
  double ceiling = 0.0;
  std::size_t no_touch_index = 0;
  std::string kernel;      // provenance: kernel spec text
  std::string reward_id;   // provenance: which learned reward
  std::uint64_t space_hash = 0;
};

RewardTable build_reward_table(std::vector<double> raw, std::size_t no_touch,
                               const FeatureSpace& space, std::string kernel,
                               std::string reward_id);

/// Display smoothing: R_bar <- R_bar + alpha (R - R_bar), alpha = 5/18.
/// The first value fed in initializes R_bar.
class SmoothingState {
 public:
  static constexpr double kAlpha = 5.0 / 18.0;

  SmoothingState() = default;
  explicit SmoothingState(double initial) : value_(initial), initialized_(true) {}

  double update(double instantaneous);
  double value() const { return value_; }
  bool initialized() const { return initialized_; }
  /// R_bar / ceiling clamped to [0, 1].
  double fill(double ceiling) const;

 private:
  double value_ = 0.0;
  bool initialized_ = false;
};

double fill_fraction(double value, double ceiling);

/// The artifact shared with the service and the game client.
struct Treatment {
  int version = 1;
  std::string kernel;
  std::uint64_t space_hash = 0;
  std::size_t no_touch_index = 0;
  double ceiling = 0.0;
  std::vector<double> values;

  bool operator==(const Treatment&) const = default;
};

Treatment to_treatment(const RewardTable& table);

/// Control arm: every touch worth one point, no touch worth nothing.
Treatment control_treatment(const FeatureSpace& space, std::size_t no_touch);

// Treatment text:
//   version 1
//   kernel <spec>
//   space_hash <16 hex digits>
//   no_touch_index <i>
//   ceiling <double>
//   count <N>
//   <index> <value>      (N rows)
std::string export_treatment(const Treatment& treatment);
void export_treatment(std::ostream& out, const Treatment& treatment);

/// Throws incompatible_space when the file's hash differs from expected_hash.
Treatment import_treatment(std::string_view text, std::uint64_t expected_hash);
Treatment import_treatment(std::istream& in, std::uint64_t expected_hash);
/// Parse without a compatibility check.
Treatment parse_treatment(std::string_view text);

std::string hash_hex(std::uint64_t hash);
std::uint64_t parse_hash_hex(std::string_view text);

}  // namespace irl
