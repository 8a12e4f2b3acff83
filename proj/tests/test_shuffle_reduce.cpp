#include <limits>

#include "doctest.h"
#include "pemsim/shuffle.hpp"

using namespace pemsim;

namespace {

std::vector<std::vector<std::int64_t>> map_inputs(std::int64_t v, std::int64_t N_M) {
  std::vector<std::vector<std::int64_t>> input(v, std::vector<std::int64_t>(N_M));
  for (std::int64_t k = 0; k < v; ++k)
    for (std::int64_t j = 0; j < N_M; ++j) input[k][j] = 1 + (2 * k + 3 * j) % 5;
  return input;
}

struct Case {
  std::int64_t N_M, N_R, H;
  std::int32_t v, w;
  std::uint64_t seed;
};

ShuffleInstance make(const Case& c) {
  GenerateParams g;
  g.N_M = c.N_M;
  g.N_R = c.N_R;
  g.H = c.H;
  g.v = c.v;
  g.w = c.w;
  g.seed = c.seed;
  return generate(g);
}

ReduceResult map_and_reduce(const ShuffleInstance& inst, const std::vector<std::vector<std::int64_t>>& input,
                            const MachineConfig& config, const ReduceOp& op, std::size_t* ios = nullptr) {
  auto ws = make_map_workspace(config, inst, input);
  const auto H = static_cast<std::size_t>(inst.H);
  const auto m = meta_column_budget(config.memory, config.block, H, config.processors);
  const auto R = runs_for_parallel_reduce(H, static_cast<std::size_t>(inst.N_R),
                                         static_cast<std::size_t>(inst.w), config.block);
  const auto meta = prepare_parallel_map(ws.machine, inst, ws.input, m, R);
  auto out = finalize_parallel_reduce(ws.machine, meta, inst.N_R, inst.w, op);
  if (ios) *ios = ws.machine.parallel_io_count();
  CHECK(is_dense(out.region, config.block));
  return out;
}

}  // namespace

TEST_CASE("sums match the combined product") {
  for (const auto& c : {Case{16, 8, 64, 1, 1, 1}, Case{24, 12, 144, 2, 3, 2}, Case{40, 6, 200, 1, 2, 3}}) {
    const auto inst = make(c);
    const auto input = map_inputs(c.v, c.N_M);
    for (std::size_t P : {1u, 2u, 4u, 8u}) {
      CAPTURE(P);
      const auto out = map_and_reduce(inst, input, MachineConfig{P, 12, 3}, ReduceOp{});
      CHECK(out.by_output == oracle_combined_mxv(inst, input));
    }
  }
}

TEST_CASE("maximum as the reduction") {
  const auto inst = make(Case{20, 10, 120, 1, 2, 5});
  const auto input = map_inputs(1, 20);
  ReduceOp op;
  op.combine = [](std::int64_t a, std::int64_t b) { return std::max(a, b); };
  op.identity = std::numeric_limits<std::int64_t>::min();
  Semiring s;
  s.add = op.combine;
  s.zero = op.identity;
  for (std::size_t P : {1u, 3u, 6u})
    CHECK(map_and_reduce(inst, input, MachineConfig{P, 12, 3}, op).by_output == oracle_combined_mxv(inst, input, s));
}

TEST_CASE("long rows cross many spans") {
  // Two rows only, so most rows are split among several processors.
  const auto inst = make(Case{64, 2, 128, 1, 1, 6});
  const auto input = map_inputs(1, 64);
  for (std::size_t P : {4u, 16u}) {
    const auto out = map_and_reduce(inst, input, MachineConfig{P, 8, 2}, ReduceOp{});
    CHECK(out.by_output == oracle_combined_mxv(inst, input));
    CHECK(peek_run(make_map_workspace(MachineConfig{P, 8, 2}, inst, input).machine, Run{}).empty());
  }
}

TEST_CASE("result width must fit beside two blocks") {
  const auto inst = make(Case{16, 4, 40, 1, 8, 7});
  const auto input = map_inputs(1, 16);
  auto ws = make_map_workspace(MachineConfig{2, 12, 3}, inst, input);
  const auto meta = prepare_parallel_map(ws.machine, inst, ws.input, 8, 2);
  try {
    finalize_parallel_reduce(ws.machine, meta, inst.N_R, inst.w);
    FAIL("expected a precondition error");
  } catch (const PemError& e) {
    CHECK(e.kind() == ErrorKind::Precondition);
  }
}
