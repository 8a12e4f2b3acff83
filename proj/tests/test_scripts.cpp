#include <algorithm>
#include <random>

#include "doctest.h"
#include "pemsim/region.hpp"
#include "scripts.hpp"

using namespace pemsim;
using namespace pemsim::detail;

namespace {

// Sorted runs of random keys, one dense run per entry, laid out from address 100.
struct Fixture {
  std::vector<InitialBlock> blocks;
  std::vector<Run> runs;
  std::vector<Element> all;
};

Fixture make_runs(std::size_t count, std::size_t length, std::size_t B, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> key(1, 20);
  Fixture f;
  std::uint64_t id = 0, addr = 100;
  for (std::size_t r = 0; r < count; ++r) {
    std::vector<Element> run;
    for (std::size_t x = 0; x < length; ++x) run.push_back(Element{id++, key(rng), key(rng), 0, 0, 0});
    std::sort(run.begin(), run.end(), RowMajorLess{});
    auto packed = pack_blocks(addr, run, B);
    f.runs.push_back(dense_run(BlockAddr{addr}, run.size(), B));
    addr += packed.size();
    f.blocks.insert(f.blocks.end(), packed.begin(), packed.end());
    f.all.insert(f.all.end(), run.begin(), run.end());
  }
  std::sort(f.all.begin(), f.all.end(), RowMajorLess{});
  return f;
}

}  // namespace

TEST_CASE("single processor merge") {
  auto f = make_runs(3, 17, 4, 1);
  Machine m(MachineConfig{1, 16, 4}, f.blocks);
  std::vector<MergeInput> inputs;
  for (auto& r : f.runs) inputs.push_back(MergeInput{r});
  Run out;
  std::vector<Program> progs;
  progs.push_back(merge_program(m, 0, inputs, MergeOptions{}, out));
  const auto ios = run_programs(m, progs);
  CHECK(peek_run(m, out) == f.all);
  CHECK(is_dense(out, 4));
  // 15 input blocks, 13 output blocks, one descriptor.
  CHECK(ios == 15 + 13 + 1);
  CHECK(out.bookkeeping.size() == 1);
  CHECK(m.internal(0).empty());
}

TEST_CASE("filters restrict the merged range") {
  auto f = make_runs(2, 9, 3, 2);
  Machine m(MachineConfig{1, 9, 3}, f.blocks);
  const Key lo = sort_key(f.all[5]), hi = sort_key(f.all[12]);
  std::vector<MergeInput> inputs;
  for (auto& r : f.runs) inputs.push_back(MergeInput{r, 0, lo, hi});
  Run out;
  std::vector<Program> progs;
  MergeOptions options;
  options.bookkeeping = false;
  progs.push_back(merge_program(m, 0, inputs, options, out));
  run_programs(m, progs);
  CHECK(peek_run(m, out) == std::vector<Element>(f.all.begin() + 5, f.all.begin() + 12));
  CHECK(m.internal(0).empty());
}

TEST_CASE("splitter merge pieces concatenate to the full merge") {
  for (std::size_t q : {1u, 2u, 3u, 5u}) {
    auto f = make_runs(4, 23, 2, 7 + q);
    Machine m(MachineConfig{q, 10, 2}, f.blocks);
    std::vector<Run> pieces(q);
    std::vector<Program> progs;
    for (std::size_t r = 0; r < q; ++r)
      progs.push_back(split_merge_program(m, r, &f.runs, r, q, pieces[r]));
    run_programs(m, progs);
    Run all;
    for (auto& p : pieces) all.append(p);
    CHECK(peek_run(m, all) == f.all);
    for (std::size_t p = 0; p < q; ++p) CHECK(m.internal(p).empty());
  }
}

TEST_CASE("tree broadcast reaches every member") {
  for (std::size_t q : {1u, 2u, 5u, 8u}) {
    std::vector<InitialBlock> blocks{{BlockAddr{50}, {Element{0, 1, 1, 9, 0, 0}, Element{1, 1, 2, 8, 0, 0}}}};
    Machine m(MachineConfig{q, 6, 2, AccessPolicy::EREW}, blocks);
    std::vector<ProcId> members(q);
    for (std::size_t p = 0; p < q; ++p) members[p] = p;
    std::vector<std::vector<Element>> got(q);
    std::vector<Program> progs;
    for (std::size_t p = 0; p < q; ++p)
      progs.push_back(broadcast_program(m, p, p, &members, BlockAddr{50}, false, got[p]));
    const auto ios = run_programs(m, progs);
    CHECK(ios == 1 + 2 * ceil_log2(q));
    for (std::size_t p = 0; p < q; ++p) {
      CHECK(got[p].size() == 2);
      CHECK(m.internal(p).size() == 2);
    }
  }
}
