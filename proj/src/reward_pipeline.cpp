#include "irl/reward_pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "irl/trajectory_io.hpp"

namespace irl {

std::vector<double> tabulate(const KernelReward& reward, const FeatureSpace& space) {
  if (reward.size() != space.size())
    throw Error(Errc::invalid_argument, "reward has " + std::to_string(reward.size()) +
                                            " entries, feature space " + std::to_string(space.size()));
  const auto& v = reward.values();
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> shift_no_touch(std::span<const double> raw, std::size_t no_touch) {
  if (no_touch >= raw.size()) throw Error(Errc::invalid_argument, "no-touch index out of range");
  const double base = raw[no_touch];
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out) v -= base;
  out[no_touch] = 0.0;
  return out;
}

double nearest_rank_percentile(std::vector<double> values, unsigned percent) {
  if (values.empty()) throw Error(Errc::invalid_argument, "percentile of an empty set");
  if (percent < 1 || percent > 100) throw Error(Errc::invalid_argument, "percent must lie in [1, 100]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = (percent * n + 99) / 100;
  return values[std::max<std::size_t>(rank, 1) - 1];
}

ClipResult clip(std::span<const double> shifted, std::size_t no_touch) {
  if (shifted.empty()) throw Error(Errc::invalid_argument, "cannot clip an empty table");
  if (no_touch >= shifted.size()) throw Error(Errc::invalid_argument, "no-touch index out of range");
  std::vector<double> touch;
  touch.reserve(shifted.size());
  for (std::size_t i = 0; i < shifted.size(); ++i)
    if (i != no_touch) touch.push_back(shifted[i]);
  if (touch.empty())
    throw Error(Errc::degenerate_treatment, "table has no touch entries to take a percentile of");
  ClipResult out;
  out.ceiling = nearest_rank_percentile(std::move(touch), 97);
  if (!(out.ceiling > 0.0))
    throw Error(Errc::degenerate_treatment, "97th percentile " + format_double(out.ceiling) +
                                                " is not positive: no touch beats not touching");
  out.values.assign(shifted.begin(), shifted.end());
  for (double& v : out.values) v = std::clamp(v, 0.0, out.ceiling);
  return out;
}

RewardTable build_reward_table(std::vector<double> raw, std::size_t no_touch,
                               const FeatureSpace& space, std::string kernel,
                               std::string reward_id) {
  if (raw.size() != space.size())
    throw Error(Errc::invalid_argument, "table length does not match the feature space");
  RewardTable t;
  t.shifted = shift_no_touch(raw, no_touch);
  auto c = clip(t.shifted, no_touch);
  t.raw = std::move(raw);
  t.clipped = std::move(c.values);
  t.ceiling = c.ceiling;
  t.no_touch_index = no_touch;
  t.kernel = std::move(kernel);
  t.reward_id = std::move(reward_id);
  t.space_hash = space.hash();
  return t;
}

double SmoothingState::update(double instantaneous) {
  if (!initialized_) {
    value_ = instantaneous;
    initialized_ = true;
  } else {
    value_ += kAlpha * (instantaneous - value_);
  }
  return value_;
}

double fill_fraction(double value, double ceiling) {
  if (!(ceiling > 0.0)) throw Error(Errc::invalid_argument, "ceiling must be positive");
  return std::clamp(value / ceiling, 0.0, 1.0);
}

double SmoothingState::fill(double ceiling) const { return fill_fraction(value_, ceiling); }

Treatment to_treatment(const RewardTable& table) {
  return {1, table.kernel, table.space_hash, table.no_touch_index, table.ceiling, table.clipped};
}

Treatment control_treatment(const FeatureSpace& space, std::size_t no_touch) {
  if (no_touch >= space.size()) throw Error(Errc::invalid_argument, "no-touch index out of range");
  Treatment t;
  t.kernel = "unit";
  t.space_hash = space.hash();
  t.no_touch_index = no_touch;
  t.ceiling = 1.0;
  t.values.assign(space.size(), 1.0);
  t.values[no_touch] = 0.0;
  return t;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::uint64_t parse_hash_hex(std::string_view text) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.size() != 16)
    throw Error(Errc::invalid_argument, "malformed space hash '" + std::string(text) + "'");
  return value;
}

void export_treatment(std::ostream& out, const Treatment& t) {
  out << "version " << t.version << '\n'
      << "kernel " << t.kernel << '\n'
      << "space_hash " << hash_hex(t.space_hash) << '\n'
      << "no_touch_index " << t.no_touch_index << '\n'
      << "ceiling " << format_double(t.ceiling) << '\n'
      << "count " << t.values.size() << '\n';
  for (std::size_t i = 0; i < t.values.size(); ++i)
    out << i << ' ' << format_double(t.values[i]) << '\n';
}

std::string export_treatment(const Treatment& t) {
  std::ostringstream out;
  export_treatment(out, t);
  return out.str();
}

Treatment parse_treatment(std::string_view text) {
  Treatment t;
  std::istringstream in{std::string(text)};
  std::string line;
  auto field = [&](std::string_view key) {
    if (!std::getline(in, line))
      throw Error(Errc::invalid_argument, "treatment file ends before '" + std::string(key) + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() <= key.size() || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ')
      throw Error(Errc::invalid_argument, "treatment file: expected '" + std::string(key) + "'");
    return line.substr(key.size() + 1);
  };
  t.version = static_cast<int>(parse_u64(field("version")));
  if (t.version != 1)
    throw Error(Errc::invalid_argument, "unsupported treatment version " + std::to_string(t.version));
  t.kernel = field("kernel");
  t.space_hash = parse_hash_hex(field("space_hash"));
  t.no_touch_index = parse_u64(field("no_touch_index"));
  t.ceiling = parse_double(field("ceiling"));
  const std::size_t count = parse_u64(field("count"));
  t.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw Error(Errc::invalid_argument, "treatment file has fewer rows than its count");
    auto parts = split(line, ' ');
    if (parts.size() != 2 || parse_u64(parts[0]) != i)
      throw Error(Errc::invalid_argument, "malformed treatment row " + std::to_string(i));
    t.values.push_back(parse_double(parts[1]));
  }
  while (std::getline(in, line))
    if (!line.empty()) throw Error(Errc::invalid_argument, "trailing data after treatment rows");
  if (t.no_touch_index >= t.values.size() && !t.values.empty())
    throw Error(Errc::invalid_argument, "no-touch index out of range");
  return t;
}

Treatment import_treatment(std::string_view text, std::uint64_t expected_hash) {
  Treatment t = parse_treatment(text);
  if (t.space_hash != expected_hash)
    throw Error(Errc::incompatible_space, "treatment was built for feature space " +
                                              hash_hex(t.space_hash) + ", expected " +
                                              hash_hex(expected_hash));
  return t;
}

Treatment import_treatment(std::istream& in, std::uint64_t expected_hash) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_treatment(buf.str(), expected_hash);
}

}  // namespace irl
