#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pemsim/machine.hpp"

namespace pemsim {

/// Elements [lo, hi) of the block at `addr`, in stored order.
struct Slice {
  BlockAddr addr;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  std::size_t size() const { return hi - lo; }
  bool operator==(const Slice&) const = default;
};

/// A sequence of elements laid out over blocks. Runs written by several
/// processors are concatenations of per-writer pieces, so interior blocks
/// may be partially filled.
struct Run {
  std::vector<Slice> slices;
  /// One block per writer piece holding its descriptor; read by consumers.
  std::vector<BlockAddr> bookkeeping;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  void append(const Run& other);
};

/// n elements packed into consecutive blocks starting at `first`.
Run dense_run(BlockAddr first, std::size_t n, std::size_t block);

/// True if the run occupies consecutive full blocks (except possibly the last).
bool is_dense(const Run& run, std::size_t block);

/// Host-side view of a run's elements; performs no I/O.
std::vector<Element> peek_run(const Machine& machine, const Run& run);

/// Blocks holding `elements` densely from a fresh address, for machine setup.
std::vector<InitialBlock> pack_blocks(std::uint64_t first_addr,
                                      const std::vector<Element>& elements,
                                      std::size_t block);

/// Splits a run at element positions; positions must be non-decreasing.
std::vector<Run> split_run(const Run& run, const std::vector<std::size_t>& cuts);

/// The sub-run of elements [from, to).
Run sub_run(const Run& run, std::size_t from, std::size_t to);

}  // namespace pemsim
