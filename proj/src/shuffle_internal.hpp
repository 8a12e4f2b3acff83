#pragma once

// Shared pieces of the shuffle algorithms.

#include <utility>
#include <vector>

#include "pemsim/primitives.hpp"
#include "pemsim/shuffle.hpp"
#include "scripts.hpp"

namespace pemsim::detail {

/// [floor(p n / P), floor((p + 1) n / P)) for every p.
std::vector<std::pair<std::size_t, std::size_t>> balanced_split(std::size_t n, std::size_t P);

/// Largest merge fan-in whose buffers fit: floor(M/B) - 1, at least 2.
std::size_t fan_in_limit(const MachineConfig& config);

/// Host-side check that a run is sorted row-major.
bool is_sorted_run(const Machine& machine, const Run& run);

/// Cuts a region at positions where `boundary(prev, next)` holds.
std::vector<Run> cut_region(const Machine& machine, const Run& region,
                            const std::function<bool(const Element&, const Element&)>& boundary);

/// Sorts memory loads of `chunk` into runs appended to `out`.
Program form_runs(Machine& m, ProcId p, Run chunk, bool consume, std::vector<Run>* out);

/// Merges consecutive runs in passes of fan-in at most `fan_in` until at most
/// `target` remain. No descriptors are written. Counts passes into `passes`.
Program local_merge(Machine& m, ProcId p, std::vector<Run>* runs, std::size_t target,
                    std::size_t fan_in, bool consume, std::size_t* passes);

/// One descriptor block per run, written by p.
Program describe_runs(Machine& m, ProcId p, std::vector<Run>* runs);

/// Local phase shared by the map preparations: every processor merges its
/// runs locally, then describes them. When at most R processors hold runs,
/// they share the R allowed runs; otherwise each ends with one run. Runs are
/// returned in processor order, or in `order` when given.
std::vector<Run> local_phase(Machine& machine, std::vector<std::vector<Run>> per_proc,
                             std::size_t R, bool consume, std::size_t* passes,
                             const std::vector<ProcId>* order = nullptr);

/// Reads every block of each processor's part of `region`, in parallel.
/// Used where a pass over the data is needed to discover structure.
void scan_region(Machine& machine, const Run& region);

/// Processor p reads every block of parts[p].
void scan_parts(Machine& machine, const std::vector<Run>& parts);

/// Range-bounded load balance of a key-sorted region, then local merges of
/// each span's key runs, then parallel merging down to R runs.
MetaRunSet balance_and_merge(Machine& machine, const Run& region, const KeyOf& key_of,
                             std::int64_t keys, std::size_t R, std::size_t d, const MergeConfig& config);

/// config.degree when set, otherwise merge_degree for the machine.
std::size_t degree_for(const Machine& machine, std::size_t H, const MergeConfig& config);

/// Rearranges row tiles of runs covering increasing column ranges into one
/// dense row-major region. `destinations`, when given, receives the staging
/// block offset of every tile in row-major tile order.
Run transpose_tiles(Machine& machine, const std::vector<Run>& runs, std::int64_t N_R,
                    std::vector<std::int64_t>* destinations = nullptr);

}  // namespace pemsim::detail
