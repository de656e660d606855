#pragma once

#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace irl::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one irlkit invocation. Returns 0 on success, 2 on usage errors and 1
/// when the run itself fails; failures print one
/// `error: code=<code> message="..."` line to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "gridworld:n=8,seed=3" -> {"gridworld", {n: 8, seed: 3}}.
struct ModelSpec {
  std::string name;
  std::map<std::string, std::string> params;

  static ModelSpec parse(std::string_view text);
  std::string get(const std::string& key, const std::string& fallback) const;
};

/// Header lines "<key> <value>" followed by consecutive "<i> <value>" rows.
/// Treatment files and reward tables both use this shape.
struct IndexedTable {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<double> values;

  std::string field(const std::string& key) const;
  bool has(const std::string& key) const;
};

IndexedTable read_indexed_table(const std::string& path);
void write_indexed_table(std::ostream& out, const IndexedTable& table);

}  // namespace irl::cli
