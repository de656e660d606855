#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "irl/mdp.hpp"

namespace irl {

// Trajectory text format, one trajectory per header:
//
//   # seed=<u64> tick_period=<seconds> source=<expert|simulated|human>
//   <t>,<state-encoding>,<action-index>
//   ...
//
// Several trajectories may share a file; each header starts a new one.

/// Shortest round-trip decimal representation.
std::string format_double(double value);
double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);

template <class State>
struct StateCodec {
  std::function<std::string(const State&)> encode;
  /// Receives the comma-separated fields between t and the action index.
  std::function<State(std::span<const std::string_view>)> decode;
};

StateCodec<StateIndex> index_codec();

template <class State>
void write_trajectories(std::ostream& out, std::span<const Trajectory<State>> trajs,
                        const StateCodec<State>& codec) {
  for (const auto& traj : trajs) {
    out << "# seed=" << traj.seed << " tick_period=" << format_double(traj.tick_period)
        << " source=" << to_string(traj.source) << '\n';
    for (std::size_t t = 0; t < traj.size(); ++t)
      out << t << ',' << codec.encode(traj.states[t]) << ',' << traj.actions[t] << '\n';
  }
}

template <class State>
std::vector<Trajectory<State>> read_trajectories(std::istream& in,
                                                 const StateCodec<State>& codec) {
  std::vector<Trajectory<State>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      Trajectory<State> traj;
      std::istringstream header(line.substr(1));
      std::string token;
      while (header >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        std::string_view key(token.data(), eq);
        std::string_view value(token.data() + eq + 1, token.size() - eq - 1);
        if (key == "seed") traj.seed = parse_u64(value);
        else if (key == "tick_period") traj.tick_period = parse_double(value);
        else if (key == "source") traj.source = parse_trajectory_source(value);
      }
      if (!(traj.tick_period > 0.0))
        throw Error(Errc::invalid_argument, "tick period must be positive");
      out.push_back(std::move(traj));
      continue;
    }
    if (out.empty())
      throw Error(Errc::invalid_argument, "trajectory record before header at line " +
                                              std::to_string(line_no));
    auto fields = split(line, ',');
    if (fields.size() < 3)
      throw Error(Errc::invalid_argument, "short trajectory record at line " +
                                              std::to_string(line_no));
    auto& traj = out.back();
    if (parse_u64(fields.front()) != traj.size())
      throw Error(Errc::invalid_argument, "non-consecutive tick at line " +
                                              std::to_string(line_no));
    std::span<const std::string_view> state_fields(fields.data() + 1, fields.size() - 2);
    traj.states.push_back(codec.decode(state_fields));
    traj.actions.push_back(static_cast<ActionIndex>(parse_u64(fields.back())));
  }
  return out;
}

}  // namespace irl
