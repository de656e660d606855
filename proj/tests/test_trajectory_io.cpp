#include <doctest.h>

#include <limits>
#include <sstream>

#include "irl/trajectory_io.hpp"

using namespace irl;

TEST_CASE("doubles round-trip through text") {
  for (double x : {0.0, -0.0, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5,
                   std::numeric_limits<double>::max(), std::numeric_limits<double>::denorm_min()})
    CHECK(parse_double(format_double(x)) == x);
  CHECK(parse_double(" +1.5 ") == 1.5);
  CHECK_THROWS_AS(parse_double("1.5x"), Error);
  CHECK_THROWS_AS(parse_double(""), Error);
  CHECK(parse_u64("18446744073709551615") == std::numeric_limits<std::uint64_t>::max());
  CHECK_THROWS_AS(parse_u64("-1"), Error);
  CHECK_THROWS_AS(parse_u64("18446744073709551616"), Error);
}

TEST_CASE("split keeps empty fields") {
  auto f = split("a,,b", ',');
  REQUIRE(f.size() == 3);
  CHECK(f[1].empty());
  CHECK(split("", ',').size() == 1);
}

TEST_CASE("trajectories round-trip") {
  std::vector<Trajectory<StateIndex>> in(2);
  in[0].states = {0, 4, 4, 2};
  in[0].actions = {1, 0, 3, 2};
  in[0].seed = 991;
  in[0].tick_period = 1.0 / 30.0;
  in[0].source = TrajectorySource::human;
  in[1].states = {7};
  in[1].actions = {0};
  in[1].seed = 3;
  in[1].source = TrajectorySource::expert;
  std::ostringstream out;
  write_trajectories<StateIndex>(out, in, index_codec());
  std::istringstream back(out.str());
  auto got = read_trajectories(back, index_codec());
  REQUIRE(got.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(got[i].states == in[i].states);
    CHECK(got[i].actions == in[i].actions);
    CHECK(got[i].seed == in[i].seed);
    CHECK(got[i].tick_period == in[i].tick_period);
    CHECK(got[i].source == in[i].source);
  }
  // Writing again reproduces the same bytes.
  std::ostringstream again;
  write_trajectories<StateIndex>(again, got, index_codec());
  CHECK(again.str() == out.str());
}

TEST_CASE("malformed trajectory files are rejected") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_trajectories(in, index_codec());
  };
  CHECK_THROWS_AS(read("0,1,0\n"), Error);
  CHECK_THROWS_AS(read("# seed=1 tick_period=1 source=expert\n0,1\n"), Error);
  CHECK_THROWS_AS(read("# seed=1 tick_period=1 source=expert\n1,1,0\n"), Error);
  CHECK_THROWS_AS(read("# seed=1 tick_period=0 source=expert\n"), Error);
  CHECK_THROWS_AS(read("# seed=1 tick_period=1 source=robot\n"), Error);
  CHECK_THROWS_AS(read("# seed=x tick_period=1 source=expert\n"), Error);
  CHECK_THROWS_AS(read("# seed=1 tick_period=1 source=expert\n0,a,0\n"), Error);
  CHECK(read("").empty());
  CHECK(read("# seed=1 tick_period=1 source=expert\n\n0,2,1\n").front().states.size() == 1);
}
