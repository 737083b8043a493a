#include <doctest.h>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/text_io.hpp"

using namespace spikeforge;

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(text::format_double(0.1) == "0.1");
  CHECK(text::format_double(100.0) == "100");
  const double x = 1.0 / 3.0;
  CHECK(text::parse_double(text::format_double(x), "x") == x);
}

TEST_CASE("strict number parsing") {
  CHECK(text::parse_double("2.5", "f") == 2.5);
  CHECK_THROWS_AS(text::parse_double(" 2.5", "f"), DataError);
  CHECK_THROWS_AS(text::parse_double("2.5abc", "f"), DataError);
  CHECK_THROWS_AS(text::parse_double("", "f"), DataError);
  CHECK(text::parse_int("42", "n") == 42);
  CHECK_THROWS_AS(text::parse_int("4.2", "n"), DataError);
}

TEST_CASE("csv reader checks the header and reports line numbers") {
  const auto dir = oracle::scratch_dir("csv");
  text::write_file(dir / "a.csv", "t_s,f\n0.005,1\n\n0.015,oops\n");
  const auto table = text::read_csv(dir / "a.csv", "t_s,f");
  REQUIRE(table.rows.size() == 2);
  CHECK(table.where(1).find(":4") != std::string::npos);
  CHECK_THROWS_AS(text::read_csv(dir / "a.csv", "t_s,g"), DataError);
  CHECK_THROWS_AS(text::read_file(dir / "missing.csv"), DataError);
}
