#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pemsim/harness.hpp"

using namespace pemsim;

namespace {

ReportRow synthetic(const std::string& alg, std::size_t P, double leading, std::size_t measured) {
  ReportRow r;
  r.algorithm = alg;
  r.P = P;
  r.leading = leading;
  r.measured = measured;
  r.H = static_cast<std::int64_t>(measured);
  return r;
}

// Scans C2 on a fine grid; C1 is then forced by the worst row.
double brute_minimax(const std::vector<ReportRow>& rows) {
  double best = INFINITY;
  for (int k = 0; k <= 200000; ++k) {
    const double c2 = k * 1e-4;
    double c1 = 0;
    for (const auto& r : rows)
      c1 = std::max(c1, (static_cast<double>(r.measured) - c2 * std::log2(static_cast<double>(r.P))) / r.leading);
    best = std::min(best, std::max(c1, c2));
  }
  return best;
}

}  // namespace

TEST_CASE("spec parsing") {
  std::istringstream in(R"(# small grid
N_M = [8, 16]
N_R = 8
H = [32]
P = [1, 2]
M = 16
B = 2
seeds = [5, 6]
algorithms = [direct_shuffle, complete_sort]
threads = 2
potential = false
)");
  const auto s = parse_spec(in);
  CHECK(s.N_M == std::vector<std::int64_t>{8, 16});
  CHECK(s.N_R == std::vector<std::int64_t>{8});
  CHECK(s.P == std::vector<std::size_t>{1, 2});
  CHECK(s.seeds == std::vector<std::uint64_t>{5, 6});
  CHECK(s.algorithms == std::vector<std::string>{"direct_shuffle", "complete_sort"});
  CHECK(s.threads == 2);
  CHECK_FALSE(s.potential);
  CHECK(s.v == std::vector<std::int64_t>{1});

  std::istringstream bad("frobnicate = 3\n");
  CHECK_THROWS_AS(parse_spec(bad), PemError);
  std::istringstream bad_value("H = [1, x]\n");
  CHECK_THROWS_AS(parse_spec(bad_value), PemError);
}

TEST_CASE("empty grid writes only the header") {
  ExperimentSpec s;
  s.algorithms = algorithm_names();
  std::ostringstream os;
  write_report(os, run_sweep(s));
  CHECK(os.str() ==
        "algorithm,N_M,N_R,H,v,w,P,M,B,seed,status,reason,measured,leading,lower,correct,potential,copy_steps,min_margin\n");
}

TEST_CASE("report round trip") {
  ExperimentSpec s;
  s.N_M = {16};
  s.N_R = {16};
  s.H = {64, 100000};
  s.P = {2};
  s.M = {16};
  s.B = {2};
  s.algorithms = {"complete_sort", "sorted_parallel"};
  const auto report = run_sweep(s);
  std::ostringstream a;
  write_report(a, report);
  std::istringstream in(a.str());
  std::ostringstream b;
  write_report(b, read_report(in));
  CHECK(a.str() == b.str());
  REQUIRE(report.rows.size() == 4);
  const auto skipped = std::count_if(report.rows.begin(), report.rows.end(),
                                     [](const ReportRow& r) { return r.status == RowStatus::Skipped; });
  CHECK(skipped == 2);
  CHECK(report.passed());
}

TEST_CASE("complete sort rows pass every verdict") {
  for (std::int64_t H : {64, 256}) {
    const auto r = run_point("complete_sort", 16, 16, H, 1, 1, MachineConfig{2, 16, 4}, 9);
    REQUIRE(r.status == RowStatus::Ok);
    CHECK(r.correct == Verdict::Pass);
    CHECK(r.potential == Verdict::Pass);
    CHECK(r.measured > 0);
  }
}

TEST_CASE("unknown algorithm fails the row") {
  CHECK_THROWS_AS(run_point("bogus", 8, 8, 16, 1, 1, MachineConfig{1, 8, 2}, 1), PemError);
}

TEST_CASE("calibration of an exact fit") {
  std::vector<ReportRow> rows;
  for (std::size_t x = 0; x < 12; ++x) rows.push_back(synthetic("a", std::size_t{1} << (x % 4), 10.0 + x, 10 + x));
  const auto c = calibrate(Report{rows}).at("a");
  CHECK(c.C1 == doctest::Approx(1.0));
  CHECK(c.C2 == doctest::Approx(0.0));
  CHECK(c.rows == 12);
}

TEST_CASE("calibration matches a brute-force minimax") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ReportRow> rows;
    for (int x = 0; x < 15; ++x) {
      const std::size_t P = std::size_t{1} << (rng() % 7);
      const double leading = 1 + static_cast<double>(rng() % 100) / 4;
      rows.push_back(synthetic("a", P, leading, static_cast<std::size_t>(leading * (1 + rng() % 5) + rng() % 20)));
    }
    const auto c = calibrate(Report{rows}).at("a");
    CHECK(std::max(c.C1, c.C2) == doctest::Approx(brute_minimax(rows)).epsilon(1e-3));
    CHECK(budget_violations(Report{rows}, {{"a", c}}).empty());
  }
}

TEST_CASE("calibration errors") {
  std::vector<ReportRow> few(9, synthetic("a", 2, 1, 3));
  CHECK_THROWS_AS(calibrate(Report{few}), PemError);
  std::vector<ReportRow> rows(10, synthetic("a", 2, 1, 3));
  rows.push_back(synthetic("a", 1, 0, 4));
  try {
    calibrate(Report{rows});
    FAIL("expected a domain error");
  } catch (const PemError& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
}

TEST_CASE("constants round trip and budget check") {
  std::map<std::string, Constants> c{{"a", {2.5, 1.25, 10}}, {"b", {1, 0, 12}}};
  std::ostringstream os;
  write_constants(os, c);
  std::istringstream in(os.str());
  const auto back = read_constants(in);
  CHECK(back.at("a").C1 == 2.5);
  CHECK(back.at("a").C2 == 1.25);
  CHECK(back.at("b").rows == 12);
  // 2.5 * 4 + 1.25 * log2 4 = 12.5
  Report r{{synthetic("a", 4, 4, 12), synthetic("a", 4, 4, 13)}};
  const auto over = budget_violations(r, c);
  REQUIRE(over.size() == 1);
  CHECK(over[0]->measured == 13);
}

TEST_CASE("direct shuffle fits a small constant") {
  std::vector<ReportRow> rows;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    rows.push_back(run_point("direct_shuffle", 32, 32, 256 + 64 * static_cast<std::int64_t>(seed), 1, 1,
                             MachineConfig{std::size_t{1} << (seed % 3), 16, 4}, seed));
  const auto c = calibrate(Report{rows}).at("direct_shuffle");
  CHECK(std::max(c.C1, c.C2) <= 2.0);
}
