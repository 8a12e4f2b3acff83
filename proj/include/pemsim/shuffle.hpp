#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pemsim/machine.hpp"
#include "pemsim/region.hpp"
#include "pemsim/workload.hpp"

namespace pemsim {

/// R runs, each sorted by (i, j), covering increasing column ranges.
struct MetaRunSet {
  std::size_t R = 1;
  std::vector<Run> runs;
  std::size_t d = 2;            // merge degree used by the parallel rounds
  std::size_t rounds = 0;       // parallel merge rounds
  std::size_t local_passes = 0; // longest local merge sequence on one processor
};

/// ceil(max(2, min(H/(PB), sqrt(H/P), M/B))).
std::size_t merge_degree(std::size_t H, std::size_t P, std::size_t M, std::size_t B);

/// ceil(H/(N_R B)), at least 1.
std::size_t runs_for_sorted_reduce(std::size_t H, std::size_t N_R, std::size_t B);
/// ceil(H/(N_R max(w, B))), at least 1.
std::size_t runs_for_parallel_reduce(std::size_t H, std::size_t N_R, std::size_t w, std::size_t B);

/// A machine holding an instance's triples densely from the first free address.
struct Workspace {
  Machine machine;
  Run input;
};

Workspace make_workspace(const MachineConfig& config, const ShuffleInstance& instance);

/// Map inputs for the parallel-map case: element (k, j) carries input[k-1][j-1],
/// laid out by column, then by k.
Workspace make_map_workspace(const MachineConfig& config, const ShuffleInstance& instance,
                             const std::vector<std::vector<std::int64_t>>& input);

/// The instance with every value replaced by x_ij * input[k-1][j-1]; models a
/// non-parallel map whose output is already on disk.
ShuffleInstance apply_map(const ShuffleInstance& instance,
                          const std::vector<std::vector<std::int64_t>>& input);

/// Writes every element straight to its row-major position. The destination
/// plan is computed host-side from the known non-zero positions.
Run direct_shuffle(Machine& machine, const ShuffleInstance& instance, const Run& input);

struct MergeConfig {
  bool copy_free = false;  // consume inputs, single-processor merges only
  std::size_t degree = 0;  // merge degree override for the preparations; 0 picks merge_degree
};

/// Merges sorted runs in rounds of fan-in at most d until at most R remain.
MetaRunSet parallel_merge_to_R(Machine& machine, std::vector<Run> runs, std::size_t R,
                               std::size_t d, MergeConfig config = {});

MetaRunSet prepare_unordered_map(Machine& machine, const ShuffleInstance& instance,
                                 const Run& input, std::size_t R, MergeConfig config = {});

MetaRunSet prepare_sorted_map(Machine& machine, const ShuffleInstance& instance,
                              const Run& input, std::size_t R, MergeConfig config = {});

/// `input` is the map-input region from make_map_workspace; `m` bounds the
/// inputs held per meta-column, so each meta-column spans m / v columns.
MetaRunSet prepare_parallel_map(Machine& machine, const ShuffleInstance& instance,
                                const Run& input, std::size_t m, std::size_t R);

/// min(M - B, ceil(H / P)).
std::size_t meta_column_budget(std::size_t M, std::size_t B, std::size_t H, std::size_t P);

/// Rearranges row tiles of the meta-runs into one dense row-major region.
Run finalize_nonparallel_reduce(Machine& machine, const MetaRunSet& meta, std::int64_t N_R);

struct ReduceOp {
  std::function<std::int64_t(std::int64_t, std::int64_t)> combine = std::plus<std::int64_t>{};
  std::int64_t identity = 0;
};

struct ReduceResult {
  Run region;  // (i, l) result elements, row-major, dense
  std::vector<std::vector<std::int64_t>> by_output;  // [l-1][i-1]
};

ReduceResult finalize_parallel_reduce(Machine& machine, const MetaRunSet& meta,
                                      std::int64_t N_R, std::int32_t w, const ReduceOp& op = {});

/// Full row-major sort; presorted columns are merged directly.
Run complete_sort(Machine& machine, const ShuffleInstance& instance, const Run& input,
                  MergeConfig config = {});

}  // namespace pemsim
