#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pemsim/machine.hpp"
#include "pemsim/region.hpp"

namespace pemsim {

/// Forms one block from per-participant contributions by binary tree
/// combination over the non-empty contributors, then writes it to a fresh
/// address. Contributions are placed into the participants' memories first
/// (free computation). Order in the block follows participant order.
///
/// With `combine`, every participant takes part in the tree and the receiver
/// applies `combine` to its holdings after each merge step.
BlockAddr gather(Machine& machine, const std::vector<ProcId>& participants,
                 const std::vector<std::vector<Element>>& contributions,
                 const std::function<std::vector<Element>(std::vector<Element>)>& combine = {});

enum class ScatterMode { Tree, Direct };

/// Delivers a copy of the block at `source` to every target. Tree mode is a
/// binary broadcast through inboxes and is EREW-safe; Direct mode is one
/// concurrent read and needs CREW. Targets keep the copy in memory; the
/// returned vectors are what each target received.
std::vector<std::vector<Element>> scatter(Machine& machine, BlockAddr source,
                                          const std::vector<ProcId>& targets,
                                          ScatterMode mode = ScatterMode::Tree);

using ScanOp = std::function<std::int64_t(std::int64_t, std::int64_t)>;

/// Inclusive scan of one value per processor over the inboxes. Processor p
/// ends with values[0] op ... op values[p].
std::vector<std::int64_t> prefix_sum(Machine& machine, const std::vector<std::int64_t>& values,
                                     const ScanOp& op = std::plus<std::int64_t>{});

enum class SpanRole { Volume, Range };

struct Span {
  std::size_t start = 0;   // element offset into the region
  std::size_t length = 0;
  std::int64_t key_lo = 0; // inclusive; meaningful when length > 0
  std::int64_t key_hi = 0; // inclusive
  SpanRole role = SpanRole::Volume;
};

/// One span per processor. Spans are disjoint and cover the region.
struct Assignment {
  std::vector<Span> spans;
  std::size_t ios = 0;
};

using KeyOf = std::function<std::int64_t(const Element&)>;

/// Splits a key-sorted region among the processors so that each gets at most
/// ceil(2n/P) tuples spanning at most ceil(2m/P) keys. Keys lie in 1..m.
Assignment range_bounded_load_balance(Machine& machine, const Run& region, const KeyOf& key_of,
                                      std::int64_t m);

/// Packs the elements of `region` densely into fresh consecutive blocks,
/// preserving order.
Run contract(Machine& machine, const Run& region);

}  // namespace pemsim
