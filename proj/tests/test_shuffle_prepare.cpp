#include <algorithm>

#include "doctest.h"
#include "pemsim/shuffle.hpp"

using namespace pemsim;

namespace {

ShuffleInstance make(std::int64_t N_M, std::int64_t N_R, std::int64_t H, Layout layout, std::uint64_t seed) {
  GenerateParams g;
  g.N_M = N_M;
  g.N_R = N_R;
  g.H = H;
  g.layout = layout;
  g.seed = seed;
  return generate(g);
}

std::vector<Triple> triples_of(const Machine& m, const Run& run) {
  std::vector<Triple> out;
  for (const auto& e : peek_run(m, run)) out.push_back(to_triple(e));
  return out;
}

// Union of the runs, each checked sorted, compared as a multiset with the oracle.
void check_meta(const Machine& m, const MetaRunSet& meta, const ShuffleInstance& inst) {
  CHECK(meta.runs.size() <= std::max<std::size_t>(1, meta.R));
  std::vector<Element> all;
  for (const auto& r : meta.runs) {
    const auto e = peek_run(m, r);
    CHECK(std::is_sorted(e.begin(), e.end(), RowMajorLess{}));
    all.insert(all.end(), e.begin(), e.end());
  }
  std::sort(all.begin(), all.end(), RowMajorLess{});
  std::vector<Triple> got;
  for (const auto& e : all) got.push_back(to_triple(e));
  CHECK(got == oracle_shuffle(inst));
}

void expect_precondition(auto&& fn) {
  try {
    fn();
    FAIL("expected a precondition error");
  } catch (const PemError& e) {
    CHECK(e.kind() == ErrorKind::Precondition);
  }
}

}  // namespace

TEST_CASE("direct shuffle") {
  SUBCASE("budget and output") {
    const auto inst = make(16, 16, 64, Layout::mixed(), 3);
    auto ws = make_workspace(MachineConfig{4, 16, 4}, inst);
    const auto out = direct_shuffle(ws.machine, inst, ws.input);
    CHECK(ws.machine.parallel_io_count() <= 32);
    CHECK(triples_of(ws.machine, out) == oracle_shuffle(inst));
  }
  SUBCASE("one processor, unit blocks") {
    const auto inst = make(6, 5, 12, Layout::column(), 4);
    auto ws = make_workspace(MachineConfig{1, 3, 1}, inst);
    direct_shuffle(ws.machine, inst, ws.input);
    CHECK(ws.machine.parallel_io_count() == 24);
  }
  SUBCASE("too little volume") {
    const auto inst = make(4, 4, 6, Layout::mixed(), 5);
    auto ws = make_workspace(MachineConfig{4, 8, 2}, inst);
    expect_precondition([&] { direct_shuffle(ws.machine, inst, ws.input); });
  }
}

TEST_CASE("unordered map preparation") {
  SUBCASE("eight runs from 4096 triples") {
    const auto inst = make(64, 64, 4096, Layout::mixed(), 7);
    auto ws = make_workspace(MachineConfig{8, 64, 8}, inst);
    const auto R = runs_for_sorted_reduce(4096, 64, 8);
    REQUIRE(R == 8);
    const auto meta = prepare_unordered_map(ws.machine, inst, ws.input, R);
    CHECK(meta.runs.size() == 8);
    CHECK(meta.rounds == 0);
    check_meta(ws.machine, meta, inst);
  }
  SUBCASE("fewer runs than processors needs merge rounds") {
    const auto inst = make(32, 16, 256, Layout::mixed(), 8);
    auto ws = make_workspace(MachineConfig{8, 16, 4}, inst);
    const auto meta = prepare_unordered_map(ws.machine, inst, ws.input, 2);
    CHECK(meta.rounds >= 1);
    check_meta(ws.machine, meta, inst);
  }
  SUBCASE("wrong layout") {
    const auto inst = make(8, 8, 32, Layout::row(), 9);
    auto ws = make_workspace(MachineConfig{2, 8, 2}, inst);
    expect_precondition([&] { prepare_unordered_map(ws.machine, inst, ws.input, 2); });
  }
}

TEST_CASE("sorted map preparation") {
  SUBCASE("two tree levels above one run per processor") {
    const auto inst = make(64, 16, 256, Layout::column(), 11);
    auto ws = make_workspace(MachineConfig{64, 12, 2}, inst);
    MergeConfig config;
    config.degree = 4;
    const auto meta = prepare_sorted_map(ws.machine, inst, ws.input, 8, config);
    CHECK(meta.rounds == 2);
    check_meta(ws.machine, meta, inst);
  }
  SUBCASE("few columns are already the runs") {
    const auto inst = make(4, 32, 64, Layout::column(), 12);
    auto ws = make_workspace(MachineConfig{2, 8, 2}, inst);
    const auto meta = prepare_sorted_map(ws.machine, inst, ws.input, 4);
    CHECK(meta.rounds == 0);
    CHECK(meta.runs.size() == 4);
    check_meta(ws.machine, meta, inst);
  }
  SUBCASE("sparse rows fall back to the unordered path") {
    const auto inst = make(32, 64, 96, Layout::column(), 13);
    auto ws = make_workspace(MachineConfig{4, 16, 4}, inst);
    const auto meta = prepare_sorted_map(ws.machine, inst, ws.input, 2);
    check_meta(ws.machine, meta, inst);
  }
  SUBCASE("random shapes") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const auto P = std::size_t{1} << (seed % 4);
      const auto inst = make(24, 12, 144, Layout::column(), 100 + seed);
      auto ws = make_workspace(MachineConfig{P, 12, 3}, inst);
      const auto meta = prepare_sorted_map(ws.machine, inst, ws.input, 1 + seed % 5);
      check_meta(ws.machine, meta, inst);
    }
  }
}

TEST_CASE("complete sort") {
  SUBCASE("mixed columns") {
    const auto inst = make(64, 64, 1024, Layout::mixed(), 21);
    auto ws = make_workspace(MachineConfig{4, 64, 4}, inst);
    const auto out = complete_sort(ws.machine, inst, ws.input);
    CHECK(is_dense(out, 4));
    CHECK(triples_of(ws.machine, out) == oracle_shuffle(inst));
  }
  SUBCASE("row-major input is only scanned") {
    const auto inst = make(16, 16, 64, Layout::row(), 22);
    auto ws = make_workspace(MachineConfig{4, 16, 4}, inst);
    complete_sort(ws.machine, inst, ws.input);
    CHECK(ws.machine.parallel_io_count() == 4);
  }
  SUBCASE("presorted columns cost no more than unordered") {
    // Few long columns against a small fan-in, where presortedness saves passes.
    const auto sorted = make(4, 256, 1024, Layout::column(), 23);
    auto mixed = sorted;
    relayout(mixed, Layout::mixed());
    auto a = make_workspace(MachineConfig{2, 8, 2}, sorted);
    auto b = make_workspace(MachineConfig{2, 8, 2}, mixed);
    const auto ra = complete_sort(a.machine, sorted, a.input);
    const auto rb = complete_sort(b.machine, mixed, b.input);
    CHECK(triples_of(a.machine, ra) == oracle_shuffle(sorted));
    CHECK(triples_of(b.machine, rb) == oracle_shuffle(mixed));
    CHECK(a.machine.parallel_io_count() <= b.machine.parallel_io_count());
  }
  SUBCASE("copy-free") {
    const auto inst = make(16, 16, 128, Layout::mixed(), 24);
    auto ws = make_workspace(MachineConfig{2, 16, 4}, inst);
    MergeConfig config;
    config.copy_free = true;
    const auto out = complete_sort(ws.machine, inst, ws.input, config);
    CHECK(triples_of(ws.machine, out) == oracle_shuffle(inst));
  }
}

namespace {

std::vector<std::vector<std::int64_t>> map_inputs(std::int64_t v, std::int64_t N_M) {
  std::vector<std::vector<std::int64_t>> input(v, std::vector<std::int64_t>(N_M));
  for (std::int64_t k = 0; k < v; ++k)
    for (std::int64_t j = 0; j < N_M; ++j) input[k][j] = 1 + (3 * k + 5 * j) % 7;
  return input;
}

}  // namespace

TEST_CASE("parallel map preparation") {
  SUBCASE("one merge level for four meta-columns into two runs") {
    const auto inst = make(16, 16, 64, Layout::mixed(), 31);
    const auto input = map_inputs(1, 16);
    for (std::size_t P : {2u, 4u}) {
      auto ws = make_map_workspace(MachineConfig{P, 8, 2}, inst, input);
      const auto meta = prepare_parallel_map(ws.machine, inst, ws.input, 4, 2);
      CHECK(meta.rounds + meta.local_passes == 1);
      check_meta(ws.machine, meta, apply_map(inst, input));
    }
  }
  SUBCASE("few meta-columns need nothing more") {
    const auto inst = make(8, 16, 64, Layout::mixed(), 32);
    const auto input = map_inputs(1, 8);
    auto ws = make_map_workspace(MachineConfig{4, 12, 2}, inst, input);
    const auto meta = prepare_parallel_map(ws.machine, inst, ws.input, 8, 2);
    CHECK(meta.rounds == 0);
    CHECK(meta.local_passes == 0);
    CHECK(meta.runs.size() == 1);
    check_meta(ws.machine, meta, apply_map(inst, input));
  }
  SUBCASE("several map inputs, random shapes") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      GenerateParams g;
      g.N_M = 20;
      g.N_R = 12;
      g.H = 120;
      g.v = 1 + static_cast<std::int32_t>(seed % 3);
      g.seed = 40 + seed;
      const auto inst = generate(g);
      const auto input = map_inputs(g.v, g.N_M);
      const auto P = std::size_t{1} << (seed % 4);
      const MachineConfig config{P, 12, 3};
      auto ws = make_map_workspace(config, inst, input);
      const auto m = meta_column_budget(12, 3, 120, P);
      const auto meta = prepare_parallel_map(ws.machine, inst, ws.input, m, 1 + seed % 4);
      check_meta(ws.machine, meta, apply_map(inst, input));
    }
  }
  SUBCASE("m below B") {
    const auto inst = make(8, 8, 32, Layout::mixed(), 33);
    const auto input = map_inputs(1, 8);
    auto ws = make_map_workspace(MachineConfig{2, 12, 4}, inst, input);
    expect_precondition([&] { prepare_parallel_map(ws.machine, inst, ws.input, 3, 2); });
  }
}
