#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pemsim/workload.hpp"

using namespace pemsim;

namespace {

GenerateParams params(std::int64_t N_M, std::int64_t N_R, std::int64_t H, Layout layout,
                      Regularity reg = Regularity::None, std::uint64_t seed = 1) {
  GenerateParams g;
  g.N_M = N_M;
  g.N_R = N_R;
  g.H = H;
  g.layout = layout;
  g.regularity = reg;
  g.seed = seed;
  return g;
}

}  // namespace

TEST_CASE("dense column-major instance is sorted by (j, i)") {
  const auto inst = generate(params(4, 4, 16, Layout::column()));
  REQUIRE(inst.triples.size() == 16);
  for (std::size_t x = 0; x < 16; ++x) {
    CHECK(inst.triples[x].j == static_cast<std::int64_t>(x / 4 + 1));
    CHECK(inst.triples[x].i == static_cast<std::int64_t>(x % 4 + 1));
  }
}

TEST_CASE("regularity") {
  const auto col = generate(params(8, 8, 16, Layout::mixed(), Regularity::Column));
  std::map<std::int64_t, int> per_col, per_row;
  for (const auto& t : col.triples) ++per_col[t.j];
  CHECK(per_col.size() == 8);
  for (const auto& [j, c] : per_col) CHECK(c == 2);

  const auto both = generate(params(6, 9, 18, Layout::row(), Regularity::Both, 5));
  per_col.clear();
  for (const auto& t : both.triples) {
    ++per_col[t.j];
    ++per_row[t.i];
  }
  for (const auto& [j, c] : per_col) CHECK(c == 3);
  for (const auto& [i, c] : per_row) CHECK(c == 2);
  CHECK(per_row.size() == 9);
  CHECK(layout_violation(both).empty());
}

TEST_CASE("generation errors") {
  CHECK_THROWS_AS(generate(params(2, 2, 5, Layout::row())), PemError);
  CHECK_THROWS_AS(generate(params(3, 4, 4, Layout::row(), Regularity::Column)), PemError);
  CHECK_THROWS_AS(generate(params(4, 3, 4, Layout::row(), Regularity::Row)), PemError);
  auto g = params(4, 4, 8, Layout::row());
  g.v = 3;
  CHECK_THROWS_AS(generate(g), PemError);
}

TEST_CASE("determinism and layout validity") {
  for (auto layout : {Layout::mixed(), Layout::column(), Layout::row(), Layout::meta(3)}) {
    for (auto reg : {Regularity::None, Regularity::Column, Regularity::Row, Regularity::Both}) {
      auto g = params(12, 8, 48, layout, reg, 99);
      g.v = 2;
      g.w = 3;
      const auto a = generate(g);
      const auto b = generate(g);
      CHECK(a == b);
      CHECK(layout_violation(a) == "");
      std::vector<std::int64_t> values;
      for (const auto& t : a.triples) values.push_back(t.value);
      std::sort(values.begin(), values.end());
      for (std::size_t x = 0; x < values.size(); ++x) CHECK(values[x] == static_cast<std::int64_t>(x + 1));
    }
  }
}

TEST_CASE("uniform row choice under column regularity") {
  std::map<std::int64_t, int> hits;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto inst = generate(params(4, 4, 4, Layout::column(), Regularity::Column, seed));
    for (const auto& t : inst.triples)
      if (t.j == 1) ++hits[t.i];
  }
  for (std::int64_t i = 1; i <= 4; ++i) CHECK(std::abs(hits[i] / 1000.0 - 0.25) <= 0.05);
}

TEST_CASE("oracle shuffle") {
  ShuffleInstance hand{3, 3, 4, 1, 1, Layout::mixed(), {{2, 1, 10}, {1, 2, 11}, {3, 2, 12}, {1, 3, 13}}, 0};
  std::vector<std::pair<std::int64_t, std::int64_t>> order;
  for (const auto& t : oracle_shuffle(hand)) order.emplace_back(t.i, t.j);
  CHECK(order == std::vector<std::pair<std::int64_t, std::int64_t>>{{1, 2}, {1, 3}, {2, 1}, {3, 2}});

  auto row = generate(params(7, 5, 20, Layout::row()));
  CHECK(oracle_shuffle(row) == row.triples);
  auto mixed = row;
  relayout(mixed, Layout::mixed());
  auto column = row;
  relayout(column, Layout::column());
  CHECK(layout_violation(mixed).empty());
  CHECK(oracle_shuffle(mixed) == oracle_shuffle(column));
}

TEST_CASE("combined matrix-vector oracle") {
  SUBCASE("row sums") {
    auto inst = generate(params(5, 4, 12, Layout::row(), Regularity::None, 3));
    std::vector<std::vector<std::int64_t>> ones{std::vector<std::int64_t>(5, 1)};
    const auto out = oracle_combined_mxv(inst, ones);
    std::vector<std::int64_t> sums(4, 0);
    for (const auto& t : inst.triples) sums[t.i - 1] += t.value;
    CHECK(out.at(0) == sums);
  }
  SUBCASE("empty matrix") {
    auto inst = generate(params(3, 3, 0, Layout::row()));
    const auto out = oracle_combined_mxv(inst, {{1, 2, 3}});
    CHECK(out.at(0) == std::vector<std::int64_t>{0, 0, 0});
  }
  SUBCASE("diagonal") {
    ShuffleInstance diag{3, 3, 3, 1, 1, Layout::row(), {{1, 1, 7}, {2, 2, 8}, {3, 3, 9}}, 0};
    CHECK(oracle_combined_mxv(diag, {{1, 2, 3}}).at(0) == std::vector<std::int64_t>{7, 16, 27});
  }
  SUBCASE("permutation invariant, custom semiring") {
    auto g = params(6, 6, 18, Layout::mixed(), Regularity::Both, 11);
    g.v = 3;
    g.w = 2;
    auto inst = generate(g);
    std::vector<std::vector<std::int64_t>> input(3, std::vector<std::int64_t>(6));
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 6; ++j) input[k][j] = static_cast<std::int64_t>(k * 6 + j);
    Semiring maxplus{[](std::int64_t a, std::int64_t b) { return std::max(a, b); },
                     [](std::int64_t a, std::int64_t b) { return a + b; }, -1000000};
    const auto a = oracle_combined_mxv(inst, input, maxplus);
    std::mt19937 rng(4);
    std::shuffle(inst.triples.begin(), inst.triples.end(), rng);
    CHECK(oracle_combined_mxv(inst, input, maxplus) == a);
    CHECK(oracle_combined_mxv(inst, input) == oracle_combined_mxv(generate(g), input));
  }
}

TEST_CASE("text serialization round trip") {
  auto g = params(9, 7, 30, Layout::meta(4), Regularity::None, 1234567890123ULL);
  g.v = 2;
  g.w = 2;
  const auto inst = generate(g);
  std::stringstream ss;
  write_instance(ss, inst);
  const auto back = read_instance(ss);
  CHECK(back == inst);
  std::stringstream again;
  write_instance(again, back);
  std::stringstream first;
  write_instance(first, inst);
  CHECK(again.str() == first.str());

  std::istringstream bad("1 1 1 1 1 diagonal 0\n1 1 1 1 1\n");
  CHECK_THROWS_AS(read_instance(bad), PemError);
  std::istringstream short_body("2 2 2 1 1 row 0\n1 1 1 1 1\n");
  CHECK_THROWS_AS(read_instance(short_body), PemError);
}
