#include "scripts.hpp"

#include <algorithm>

namespace pemsim::detail {

void materialize(Machine& m, ProcId p, const std::vector<Element>& elements) {
  if (elements.empty()) return;
  m.compute(p, [&](std::vector<Element> mem) {
    mem.insert(mem.end(), elements.begin(), elements.end());
    return mem;
  });
}

Program read_slice(Machine& m, ProcId p, Slice s, bool consume, std::vector<Element>& out) {
  co_yield Input{s.addr, consume};
  const auto got = m.last_input(p);
  std::vector<std::uint64_t> drop;
  for (std::size_t x = 0; x < got.size(); ++x) {
    if (x >= s.lo && x < s.hi)
      out.push_back(got[x]);
    else
      drop.push_back(got[x].id);
  }
  m.discard(p, drop);
}

Program read_and_drop(Machine& m, ProcId p, BlockAddr addr, std::vector<Element>* seen) {
  co_yield Input{addr, false};
  const auto got = m.last_input(p);
  std::vector<Element> copy(got.begin(), got.end());
  m.discard(p, ids_of(copy));
  if (seen) *seen = std::move(copy);
}

Program write_elements(Machine& m, ProcId p, BlockAddr addr, std::vector<Element> elements) {
  (void)m;
  (void)p;
  co_yield output_of(addr, elements);
}

Program write_bookkeeping(Machine& m, ProcId p, std::size_t piece_size, Run& run) {
  auto record = meta(m.fresh_id(), 0, 0, static_cast<std::int64_t>(piece_size));
  materialize(m, p, {record});
  auto addr = m.allocate();
  co_yield output_of(addr, std::vector<Element>{record});
  run.bookkeeping.push_back(addr);
}

Program read_bookkeeping(Machine& m, ProcId p, const std::vector<Run>* runs) {
  for (const auto& run : *runs)
    for (auto addr : run.bookkeeping)
      for (auto a : read_and_drop(m, p, addr, nullptr)) co_yield a;
}

BlockAddr RunWriter::next_addr() {
  if (base_) return BlockAddr{base_->index + blocks_};
  return m_.allocate();
}

Program RunWriter::flush() {
  if (buffer_.empty()) co_return;
  auto addr = next_addr();
  ++blocks_;
  auto block = std::move(buffer_);
  buffer_.clear();
  written_ += block.size();
  run_.slices.push_back({addr, 0, static_cast<std::uint32_t>(block.size())});
  co_yield output_of(addr, block);
}

namespace {

struct Cursor {
  const Run* run = nullptr;
  std::size_t next = 0;
  std::deque<Element> buf;
  std::optional<Key> lower;
  std::optional<Key> upper;
  bool stopped = false;

  bool needs_load() const { return !stopped && buf.empty() && next < run->slices.size(); }
};

}  // namespace

Program merge_program(Machine& m, ProcId p, std::vector<MergeInput> inputs,
                      MergeOptions options, Run& out) {
  if (options.bookkeeping) {
    std::vector<Run> runs;
    for (const auto& in : inputs) runs.push_back(in.run);
    for (auto a : read_bookkeeping(m, p, &runs)) co_yield a;
  }

  std::vector<Cursor> cursors(inputs.size());
  for (std::size_t c = 0; c < inputs.size(); ++c) {
    cursors[c].run = &inputs[c].run;
    cursors[c].next = inputs[c].first_slice;
    cursors[c].lower = inputs[c].lower;
    cursors[c].upper = inputs[c].upper;
  }

  RunWriter writer(m, p, options.base);
  while (true) {
    auto loading = std::find_if(cursors.begin(), cursors.end(),
                                [](const Cursor& c) { return c.needs_load(); });
    if (loading != cursors.end()) {
      const auto addr = loading->run->slices[loading->next].addr;
      co_yield Input{addr, options.consume};
      const auto span = m.last_input(p);
      const std::vector<Element> got(span.begin(), span.end());
      std::vector<bool> kept(got.size(), false);
      for (auto& c : cursors) {
        // A cursor still holding elements waits for its own read, so no
        // cursor ever buffers more than one block.
        if (!c.buf.empty()) continue;
        while (!c.stopped && c.next < c.run->slices.size() &&
               c.run->slices[c.next].addr == addr) {
          const auto s = c.run->slices[c.next];
          for (std::size_t x = s.lo; x < s.hi && x < got.size(); ++x) {
            const auto key = sort_key(got[x]);
            if (c.lower && key < *c.lower) continue;
            if (c.upper && key >= *c.upper) {
              c.stopped = true;
              break;
            }
            c.buf.push_back(got[x]);
            kept[x] = true;
          }
          ++c.next;
        }
      }
      std::vector<std::uint64_t> drop;
      for (std::size_t x = 0; x < got.size(); ++x)
        if (!kept[x]) drop.push_back(got[x].id);
      m.discard(p, drop);
      continue;
    }

    Cursor* best = nullptr;
    for (auto& c : cursors)
      if (!c.buf.empty() && (!best || RowMajorLess{}(c.buf.front(), best->buf.front())))
        best = &c;
    if (!best) break;
    writer.push(best->buf.front());
    best->buf.pop_front();
    if (writer.full())
      for (auto a : writer.flush()) co_yield a;
  }
  for (auto a : writer.flush()) co_yield a;
  out = writer.run();
  if (options.bookkeeping)
    for (auto a : write_bookkeeping(m, p, writer.written(), out)) co_yield a;
}

Program split_merge_program(Machine& m, ProcId p, const std::vector<Run>* group,
                            std::size_t r, std::size_t q, Run& piece) {
  for (auto a : read_bookkeeping(m, p, group)) co_yield a;

  const auto d = group->size();
  std::vector<std::size_t> samples(d);
  std::size_t total = 0;
  for (std::size_t x = 0; x < d; ++x) {
    samples[x] = ceil_div((*group)[x].slices.size(), q);
    total += samples[x];
  }
  const std::size_t lo_rank = r * total / q;
  const std::size_t hi_rank = (r + 1) * total / q;
  const bool need_lo = r > 0;
  const bool need_hi = r + 1 < q;

  std::optional<Key> k_lo, k_hi;
  std::vector<std::size_t> before_lo(d, 0);
  if ((need_lo || need_hi) && total > 0) {
    std::vector<std::optional<Element>> head(d);
    std::vector<std::size_t> popped(d, 0);
    for (std::size_t x = 0; x < d; ++x) {
      if (samples[x] == 0) continue;
      std::vector<Element> got;
      for (auto a : read_slice(m, p, (*group)[x].slices[0], false, got)) co_yield a;
      head[x] = got.front();
      got.erase(got.begin());
      m.discard(p, ids_of(got));
    }
    const auto last_rank = need_hi ? hi_rank : lo_rank;
    for (std::size_t rank = 0; rank <= last_rank; ++rank) {
      std::size_t best = d;
      for (std::size_t x = 0; x < d; ++x)
        if (head[x] && (best == d || RowMajorLess{}(*head[x], *head[best]))) best = x;
      if (best == d) break;
      if (need_lo && rank == lo_rank) {
        k_lo = sort_key(*head[best]);
        before_lo = popped;
      }
      if (need_hi && rank == hi_rank) {
        k_hi = sort_key(*head[best]);
        break;
      }
      m.discard(p, std::vector<std::uint64_t>{head[best]->id});
      head[best].reset();
      if (++popped[best] < samples[best]) {
        std::vector<Element> got;
        const auto s = (*group)[best].slices[popped[best] * q];
        for (auto a : read_slice(m, p, s, false, got)) co_yield a;
        head[best] = got.front();
        got.erase(got.begin());
        m.discard(p, ids_of(got));
      }
    }
    for (auto& h : head)
      if (h) m.discard(p, std::vector<std::uint64_t>{h->id});
  }

  std::vector<MergeInput> inputs;
  for (std::size_t x = 0; x < d; ++x) {
    MergeInput in{(*group)[x], 0, k_lo, k_hi};
    if (k_lo && before_lo[x] > 0) in.first_slice = (before_lo[x] - 1) * q;
    inputs.push_back(std::move(in));
  }
  MergeOptions options;
  options.bookkeeping = false;
  Run out;
  for (auto a : merge_program(m, p, std::move(inputs), options, out)) co_yield a;
  piece = std::move(out);
}

Program broadcast_program(Machine& m, ProcId p, std::size_t position,
                          const std::vector<ProcId>* members, BlockAddr source,
                          bool consume_source, std::vector<Element>& received) {
  const auto q = members->size();
  if (position == 0) {
    co_yield Input{source, consume_source};
    const auto got = m.last_input(p);
    received.assign(got.begin(), got.end());
  } else {
    co_yield Idle{};
  }
  for (std::size_t t = 0; t < ceil_log2(q); ++t) {
    const std::size_t span = std::size_t{1} << t;
    if (position < span && position + span < q) {
      materialize(m, p, received);
      co_yield output_of(m.inbox((*members)[position + span]), received);
    } else {
      co_yield Idle{};
    }
    if (position >= span && position < 2 * span) {
      co_yield Input{m.inbox(p), true};
      const auto got = m.last_input(p);
      received.assign(got.begin(), got.end());
    } else {
      co_yield Idle{};
    }
  }
}

Program gather_program(Machine& m, ProcId p, std::size_t x, const std::vector<ProcId>* order,
                    std::vector<Element>* held, const CombineFn* combine, BlockAddr out) {
  const auto k = order->size();
  for (std::size_t t = 0; t < ceil_log2(k); ++t) {
    const std::size_t span = std::size_t{1} << t;
    if (x % (2 * span) == span) {
      co_yield output_of(m.inbox(p), *held);
      held->clear();
      co_return;
    }
    co_yield Idle{};
    if (x % (2 * span) == 0 && x + span < k) {
      co_yield Input{m.inbox((*order)[x + span]), true};
      const auto got = m.last_input(p);
      held->insert(held->end(), got.begin(), got.end());
      if (*combine) {
        auto merged = (*combine)(*held);
        m.discard(p, ids_of(*held));
        materialize(m, p, merged);
        *held = std::move(merged);
      }
    } else {
      co_yield Idle{};
    }
  }
  if (x == 0) co_yield output_of(out, *held);
}

}  // namespace pemsim::detail
