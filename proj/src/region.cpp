#include "pemsim/region.hpp"

#include <algorithm>

namespace pemsim {

std::size_t Run::size() const {
  std::size_t n = 0;
  for (const auto& s : slices) n += s.size();
  return n;
}

void Run::append(const Run& other) {
  slices.insert(slices.end(), other.slices.begin(), other.slices.end());
  bookkeeping.insert(bookkeeping.end(), other.bookkeeping.begin(), other.bookkeeping.end());
}

Run dense_run(BlockAddr first, std::size_t n, std::size_t block) {
  Run run;
  for (std::size_t pos = 0, b = 0; pos < n; pos += block, ++b) {
    const auto len = std::min(block, n - pos);
    run.slices.push_back({BlockAddr{first.index + b}, 0, static_cast<std::uint32_t>(len)});
  }
  return run;
}

bool is_dense(const Run& run, std::size_t block) {
  for (std::size_t x = 0; x < run.slices.size(); ++x) {
    const auto& s = run.slices[x];
    if (s.lo != 0) return false;
    if (x + 1 < run.slices.size()) {
      if (s.hi != block) return false;
      if (run.slices[x + 1].addr.index != s.addr.index + 1) return false;
    }
  }
  return true;
}

std::vector<Element> peek_run(const Machine& machine, const Run& run) {
  std::vector<Element> out;
  out.reserve(run.size());
  for (const auto& s : run.slices) {
    const auto& blk = machine.peek(s.addr);
    if (s.hi > blk.size())
      throw PemError(ErrorKind::MissingBlock, "slice extends past block contents");
    out.insert(out.end(), blk.begin() + s.lo, blk.begin() + s.hi);
  }
  return out;
}

std::vector<InitialBlock> pack_blocks(std::uint64_t first_addr,
                                      const std::vector<Element>& elements,
                                      std::size_t block) {
  std::vector<InitialBlock> blocks;
  for (std::size_t pos = 0, b = 0; pos < elements.size(); pos += block, ++b) {
    const auto end = std::min(elements.size(), pos + block);
    blocks.emplace_back(BlockAddr{first_addr + b},
                        std::vector<Element>(elements.begin() + pos, elements.begin() + end));
  }
  return blocks;
}

Run sub_run(const Run& run, std::size_t from, std::size_t to) {
  Run out;
  std::size_t pos = 0;
  for (const auto& s : run.slices) {
    const auto a = pos, b = pos + s.size();
    pos = b;
    if (b <= from || a >= to) continue;
    Slice t = s;
    if (from > a) t.lo += static_cast<std::uint32_t>(from - a);
    if (to < b) t.hi -= static_cast<std::uint32_t>(b - to);
    if (t.size() > 0) out.slices.push_back(t);
  }
  return out;
}

std::vector<Run> split_run(const Run& run, const std::vector<std::size_t>& cuts) {
  std::vector<Run> parts;
  std::size_t from = 0;
  for (auto c : cuts) {
    parts.push_back(sub_run(run, from, c));
    from = c;
  }
  parts.push_back(sub_run(run, from, run.size()));
  return parts;
}

}  // namespace pemsim
