#pragma once

#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pemsim/machine.hpp"
#include "pemsim/workload.hpp"

namespace pemsim {

struct Params {
  double N_M = 1, N_R = 1, H = 1;
  double v = 1, w = 1;
  double P = 1, M = 3, B = 1;
  double eps = 0.5;

  static Params of(const ShuffleInstance& instance, const MachineConfig& config, double eps = 0.5);

  double d() const;          // min{M/B, H/(PB)}, at least 2
  double scan() const { return H / (P * B); }
  /// Name of the first violated invariant, empty when all hold.
  std::string violation() const;
  /// H/N_R <= N_M^(1-eps) and H/N_M <= N_R^(1-eps).
  bool eps_region() const;
};

enum class BoundKind { Upper, Lower };

struct CostEstimate {
  double value = 0;
  BoundKind kind = BoundKind::Upper;
  std::string formula_id;
  bool valid = true;
  std::string failed;  // precondition name when !valid
};

enum class MapType { Unordered, Sorted, ParallelMap };
enum class ReduceType { NonParallel, Parallel };
enum class LowerLayout { MixedColumn, ColumnMajor, BestCase };
/// Exact mode applies the explicit constants of the counting proofs.
enum class BoundMode { Asymptotic, Exact };

/// max(log_b x, 1). Throws PemError(Domain) for b <= 1 or x <= 0.
double lgb(double b, double x);
/// log_b x with real division of logarithms.
double log_base(double b, double x);

CostEstimate table1_upper(const Params& p, MapType map, ReduceType reduce);
CostEstimate direct_shuffle_upper(const Params& p);
CostEstimate complete_merge_upper(const Params& p);
/// The additive log P term left out of the table.
double scatter_gather_term(const Params& p);

CostEstimate thm1_lower(const Params& p, LowerLayout layout, BoundMode mode = BoundMode::Asymptotic);
CostEstimate lemma2_lower(const Params& p, BoundMode mode = BoundMode::Asymptotic);
CostEstimate transpose_lower(const Params& p);
/// Lower bound for the non-parallel reduce task; only MixedColumn and
/// ColumnMajor have a merged expression.
CostEstimate combined_lower(const Params& p, LowerLayout layout);

/// Every formula evaluated at p, one CSV row each:
/// formula_id,N_M,N_R,H,v,w,P,M,B,eps,value,valid.
void write_catalog(std::ostream& os, const std::vector<Params>& points);

// Togetherness potential.

using OutputBlockOf = std::function<std::optional<std::size_t>(const Element&)>;

/// Output block of every data element in the row-major result of `instance`.
OutputBlockOf row_major_blocks(const ShuffleInstance& instance, std::size_t B);

/// f(x) = x log2 x, f(0) = 0.
double togetherness(double x);

/// Sum of the ratings of all memories and all blocks, every element counted
/// where it currently lives.
double potential(const Machine& machine, const OutputBlockOf& output_block_of);

/// Per parallel I/O increase bound: PB log2(2e) + PB log2(min{M, H/P}/B).
double potential_step_bound(const Params& p);

struct PotentialStep {
  double delta = 0;
  bool copy = false;    // the step left some element in two places
  double margin = 0;    // bound minus delta; meaningless when copy
};

/// Observes a machine and records the potential change of each parallel
/// I/O. An element read without consuming is treated as moved; the block
/// copy left behind no longer counts. A stale copy only counts again once
/// no newer location holds the element.
class PotentialMonitor {
 public:
  PotentialMonitor(Machine& machine, OutputBlockOf output_block_of, double step_bound);
  ~PotentialMonitor();
  PotentialMonitor(const PotentialMonitor&) = delete;
  PotentialMonitor& operator=(const PotentialMonitor&) = delete;

  double initial() const { return initial_; }
  double current() const;
  const std::vector<PotentialStep>& steps() const { return steps_; }
  /// Changes between steps, from computation and discards.
  double between_steps() const { return gaps_; }
  /// First non-copy step exceeding the bound.
  std::optional<std::size_t> first_violation() const;
  std::size_t copy_steps() const;

 private:
  struct Place {
    bool memory = false;
    std::uint64_t key = 0;  // processor or block address
    auto operator<=>(const Place&) const = default;
  };
  struct Tracked {
    std::size_t out = 0;
    std::optional<Place> at;
    std::vector<std::pair<std::size_t, std::uint64_t>> written;  // (step, address), oldest first
  };

  void observe(const Machine& m, StepPhase phase);
  void sync_memories() const;
  void relocate(std::uint64_t id) const;
  void move(std::uint64_t id, std::optional<Place> to) const;

  Machine& machine_;
  OutputBlockOf block_of_;
  double bound_;
  double initial_ = 0, before_ = 0, last_after_ = 0, gaps_ = 0;
  std::size_t step_ = 0;
  std::vector<PotentialStep> steps_;
  // Incremental state; sync_memories also runs from const queries.
  mutable double phi_ = 0;
  mutable std::unordered_map<std::uint64_t, Tracked> tracked_;
  mutable std::map<Place, std::unordered_map<std::size_t, double>> counts_;
  mutable std::map<std::uint64_t, std::vector<std::uint64_t>> blocks_;  // tracked ids per address
  mutable std::vector<std::vector<std::uint64_t>> memories_;            // tracked ids per processor
  mutable std::unordered_map<std::uint64_t, int> holders_;               // memories holding an id
  mutable std::set<std::uint64_t> copies_;
};

}  // namespace pemsim
