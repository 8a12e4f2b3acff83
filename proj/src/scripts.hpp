#pragma once

// Building blocks for per-processor programs. Internal to the library.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <tuple>
#include <vector>

#include "pemsim/machine.hpp"
#include "pemsim/program.hpp"
#include "pemsim/region.hpp"

namespace pemsim::detail {

using Key = std::tuple<std::int64_t, std::int64_t, std::uint64_t>;

inline std::vector<std::uint64_t> ids_of(const std::vector<Element>& elements) {
  std::vector<std::uint64_t> ids;
  ids.reserve(elements.size());
  for (const auto& e : elements) ids.push_back(e.id);
  return ids;
}

inline Element meta(std::uint64_t id, std::int64_t i, std::int64_t j, std::int64_t value,
                    std::int32_t k = 0, std::int32_t l = 0) {
  return Element{id, i, j, value, k, l, ElementKind::Meta};
}

/// Places freshly computed elements into processor p's memory.
void materialize(Machine& m, ProcId p, const std::vector<Element>& elements);

/// Reads one slice, keeps [lo, hi) (appended to `out`), discards the rest.
Program read_slice(Machine& m, ProcId p, Slice s, bool consume, std::vector<Element>& out);

/// Reads a block and discards everything; used for pure scans and lookups.
/// The delivered elements are copied to `seen` when given.
Program read_and_drop(Machine& m, ProcId p, BlockAddr addr, std::vector<Element>* seen);

/// Outputs elements currently held by p.
Program write_elements(Machine& m, ProcId p, BlockAddr addr, std::vector<Element> elements);

/// Writes a one-element descriptor block for a freshly written run piece.
Program write_bookkeeping(Machine& m, ProcId p, std::size_t piece_size, Run& run);

/// Reads the descriptor blocks of the given runs.
Program read_bookkeeping(Machine& m, ProcId p, const std::vector<Run>* runs);

/// Buffered block writer for one processor. Elements pushed must already be
/// resident in p's memory.
class RunWriter {
 public:
  RunWriter(Machine& m, ProcId p, std::optional<BlockAddr> base = std::nullopt)
      : m_(m), p_(p), base_(base) {}

  void push(const Element& e) { buffer_.push_back(e); }
  bool full() const { return buffer_.size() >= m_.config().block; }
  std::size_t buffered() const { return buffer_.size(); }
  /// Writes the buffered elements (full or partial) as the next block.
  Program flush();
  Run& run() { return run_; }
  std::size_t written() const { return written_; }

 private:
  BlockAddr next_addr();

  Machine& m_;
  ProcId p_;
  std::optional<BlockAddr> base_;
  std::size_t blocks_ = 0;
  std::size_t written_ = 0;
  std::vector<Element> buffer_;
  Run run_;
};

/// One input of a single-processor multiway merge.
struct MergeInput {
  Run run;
  std::size_t first_slice = 0;
  std::optional<Key> lower;  // drop elements below
  std::optional<Key> upper;  // stop at the first element at or above
};

struct MergeOptions {
  bool consume = false;
  bool bookkeeping = true;
  std::optional<BlockAddr> base;
};

/// Merges sorted inputs into `out` in row-major order. Slices of different
/// inputs that share a block are served by a single read. Requires
/// (inputs + 1) * B <= M.
Program merge_program(Machine& m, ProcId p, std::vector<MergeInput> inputs,
                      MergeOptions options, Run& out);

/// Participant r of q in a splitter-based merge of `group`. Splitters are
/// taken from the heads of every q-th slice; the piece written covers keys in
/// [K_r, K_{r+1}). The piece gets no descriptor; callers gather those.
Program split_merge_program(Machine& m, ProcId p, const std::vector<Run>* group,
                            std::size_t r, std::size_t q, Run& piece);

/// Tree broadcast of the block at `source` to the ordered member set; this
/// processor is member `position`. Every member ends with a copy of the
/// block in memory, returned through `received`.
Program broadcast_program(Machine& m, ProcId p, std::size_t position,
                          const std::vector<ProcId>* members, BlockAddr source,
                          bool consume_source, std::vector<Element>& received);

using CombineFn = std::function<std::vector<Element>(std::vector<Element>)>;

/// Member x of a binary gather over `order`. `held` is what this member
/// contributes (already resident); member 0 writes the result to `out`.
/// With a combine function, receivers fold their holdings after each merge.
Program gather_program(Machine& m, ProcId p, std::size_t x, const std::vector<ProcId>* order,
                       std::vector<Element>* held, const CombineFn* combine, BlockAddr out);

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

inline std::size_t ceil_log2(std::size_t x) {
  std::size_t r = 0;
  while ((std::size_t{1} << r) < x) ++r;
  return r;
}

}  // namespace pemsim::detail
