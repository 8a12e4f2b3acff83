#include <algorithm>

#include "shuffle_internal.hpp"

namespace pemsim::detail {

namespace {

// Shared layout facts. Spans are the balanced split of the concatenated runs,
// so every processor can compute every span boundary.
struct TilePlan {
  Run region;
  std::size_t n = 0, P = 1, B = 1, runs = 0;
  std::int64_t N_R = 1;
  std::vector<std::size_t> run_start;  // runs + 1 entries
  std::vector<std::vector<BlockAddr>> descriptors;
  BlockAddr S, E, D;                   // one block per tile each
  BlockAddr staging;

  std::size_t bound(std::size_t p) const { return p * n / P; }
  std::size_t owner(std::size_t x) const {
    std::size_t lo = 0, hi = P;
    while (hi - lo > 1) {
      const auto mid = (lo + hi) / 2;
      if (bound(mid) <= x) lo = mid; else hi = mid;
    }
    return lo;
  }
  std::size_t run_of(std::size_t x) const {
    return static_cast<std::size_t>(std::upper_bound(run_start.begin(), run_start.end(), x) - run_start.begin()) - 1;
  }
  std::size_t tiles() const { return runs * static_cast<std::size_t>(N_R); }
  // Column order: by run, then row. Row-major order: by row, then run.
  std::size_t column_index(std::size_t x, const Element& e) const {
    return run_of(x) * static_cast<std::size_t>(N_R) + static_cast<std::size_t>(e.i - 1);
  }
  std::size_t row_index(std::size_t c) const {
    const auto r = c / static_cast<std::size_t>(N_R), i = c % static_cast<std::size_t>(N_R);
    return i * runs + r;
  }
  std::size_t piece_blocks(std::size_t s, std::size_t e, std::size_t p) const {
    const auto lo = std::max(s, bound(p)), hi = std::min(e, bound(p + 1));
    return hi > lo ? ceil_div(hi - lo, B) : 0;
  }
  // Staging blocks of all pieces of the tile [s, e) held by spans before p.
  std::size_t blocks_before(std::size_t s, std::size_t e, std::size_t p) const {
    std::size_t total = 0;
    for (auto q = owner(s); q < p; ++q) total += piece_blocks(s, e, q);
    return total;
  }
};

struct Touch {
  std::size_t tile = 0;                  // column index
  std::optional<std::size_t> start, end; // known when inside the span
};

struct SpanState {
  std::vector<Touch> touched;
};

Program read_position(Machine& m, ProcId p, const TilePlan* plan, std::size_t x, Element* out) {
  std::vector<Element> got;
  for (auto a : read_slice(m, p, sub_run(plan->region, x, x + 1).slices.at(0), false, got)) co_yield a;
  *out = got.at(0);
  m.discard(p, ids_of(got));
}

Program write_entry(Machine& m, ProcId p, BlockAddr addr, std::int64_t value) {
  const auto entry = meta(m.fresh_id(), 0, 0, value);
  materialize(m, p, {entry});
  co_yield output_of(addr, std::vector<Element>{entry});
}

Program read_entry(Machine& m, ProcId p, BlockAddr addr, std::int64_t* value) {
  std::vector<Element> seen;
  for (auto a : read_and_drop(m, p, addr, &seen)) co_yield a;
  *value = seen.at(0).value;
}

BlockAddr at(BlockAddr base, std::size_t offset) { return BlockAddr{base.index + offset}; }

// Tile starts go to S; touched tiles with their known ends are recorded.
Program scan_phase(Machine& m, ProcId p, const TilePlan* plan, SpanState* state) {
  const auto a = plan->bound(p), b = plan->bound(p + 1);
  if (a == b) co_return;
  const auto first_run = plan->run_of(a > 0 ? a - 1 : a);
  const auto last_run = plan->run_of(std::min(b, plan->n - 1));
  for (auto r = first_run; r <= last_run; ++r)
    for (auto addr : plan->descriptors[r])
      for (auto x : read_and_drop(m, p, addr, nullptr)) co_yield x;

  std::optional<std::size_t> prev;
  if (a > 0) {
    Element e;
    for (auto x : read_position(m, p, plan, a - 1, &e)) co_yield x;
    prev = plan->column_index(a - 1, e);
  }
  std::size_t x = a;
  for (const auto& s : sub_run(plan->region, a, b).slices) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, s, false, got)) co_yield act;
    for (const auto& e : got) {
      const auto c = plan->column_index(x, e);
      if (state->touched.empty() || state->touched.back().tile != c) {
        if (!state->touched.empty()) state->touched.back().end = x;
        Touch t{c, {}, {}};
        if (!prev || *prev != c) {
          t.start = x;
          for (auto act : write_entry(m, p, at(plan->S, c), static_cast<std::int64_t>(x))) co_yield act;
        }
        state->touched.push_back(t);
      }
      ++x;
    }
    m.discard(p, ids_of(got));
  }
  if (b == plan->n) {
    state->touched.back().end = b;
  } else {
    Element e;
    for (auto act : read_position(m, p, plan, b, &e)) co_yield act;
    if (plan->column_index(b, e) != state->touched.back().tile) state->touched.back().end = b;
  }
}

Program zero_phase(Machine& m, ProcId p, const TilePlan* plan) {
  const auto U = plan->tiles();
  for (auto u = p * U / plan->P; u < (p + 1) * U / plan->P; ++u)
    for (auto a : write_entry(m, p, at(plan->E, u), 0)) co_yield a;
}

// Ends are written by the span holding the tile's last element.
Program size_phase(Machine& m, ProcId p, const TilePlan* plan, SpanState* state) {
  if (state->touched.empty()) co_return;
  auto& first = state->touched.front();
  if (!first.start) {
    std::int64_t s = 0;
    for (auto a : read_entry(m, p, at(plan->S, first.tile), &s)) co_yield a;
    first.start = static_cast<std::size_t>(s);
  }
  for (const auto& t : state->touched) {
    if (!t.end) continue;
    std::size_t blocks = 0;
    for (auto q = plan->owner(*t.start); q <= plan->owner(*t.end - 1); ++q) blocks += plan->piece_blocks(*t.start, *t.end, q);
    for (auto a : write_entry(m, p, at(plan->E, plan->row_index(t.tile)), static_cast<std::int64_t>(blocks)))
      co_yield a;
  }
}

Program sum_phase(Machine& m, ProcId p, const TilePlan* plan, std::int64_t* sum) {
  const auto U = plan->tiles();
  for (auto u = p * U / plan->P; u < (p + 1) * U / plan->P; ++u) {
    std::int64_t value = 0;
    for (auto a : read_entry(m, p, at(plan->E, u), &value)) co_yield a;
    *sum += value;
  }
}

Program offset_phase(Machine& m, ProcId p, const TilePlan* plan, std::int64_t offset) {
  const auto U = plan->tiles();
  for (auto u = p * U / plan->P; u < (p + 1) * U / plan->P; ++u) {
    std::int64_t value = 0;
    for (auto a : read_entry(m, p, at(plan->E, u), &value)) co_yield a;
    for (auto a : write_entry(m, p, at(plan->D, u), offset)) co_yield a;
    offset += value;
  }
}

// Every piece is written block-ceiled to its staging position.
Program write_phase(Machine& m, ProcId p, const TilePlan* plan, const SpanState* state) {
  const auto a = plan->bound(p), b = plan->bound(p + 1);
  if (a == b) co_return;
  const auto B = plan->B;
  std::size_t piece = 0;
  std::size_t next_block = 0;
  std::vector<Element> buffer;
  std::size_t x = a;
  auto begin_piece = [&](std::size_t k) -> Program {
    const auto& t = state->touched[k];
    std::int64_t base = 0;
    for (auto act : read_entry(m, p, at(plan->D, plan->row_index(t.tile)), &base)) co_yield act;
    const auto end = t.end ? *t.end : plan->n;
    next_block = static_cast<std::size_t>(base) + plan->blocks_before(*t.start, end, p);
  };
  for (auto act : begin_piece(0)) co_yield act;
  for (const auto& s : sub_run(plan->region, a, b).slices) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, s, false, got)) co_yield act;
    for (const auto& e : got) {
      const auto c = plan->column_index(x, e);
      if (c != state->touched[piece].tile) {
        if (!buffer.empty()) {
          co_yield output_of(at(plan->staging, next_block++), buffer);
          buffer.clear();
        }
        ++piece;
        for (auto act : begin_piece(piece)) co_yield act;
      }
      buffer.push_back(e);
      if (buffer.size() == B) {
        co_yield output_of(at(plan->staging, next_block++), buffer);
        buffer.clear();
      }
      ++x;
    }
  }
  if (!buffer.empty()) co_yield output_of(at(plan->staging, next_block++), buffer);
}

void run_all(Machine& machine, std::vector<Program>& progs) {
  run_programs(machine, progs);
  progs.clear();
}

}  // namespace

Run transpose_tiles(Machine& machine, const std::vector<Run>& runs, std::int64_t N_R,
                    std::vector<std::int64_t>* destinations) {
  TilePlan plan;
  plan.P = machine.processors();
  plan.B = machine.config().block;
  plan.N_R = N_R;
  plan.runs = runs.size();
  plan.run_start.push_back(0);
  for (const auto& r : runs) {
    plan.region.append(r);
    plan.run_start.push_back(plan.run_start.back() + r.size());
    plan.descriptors.push_back(r.bookkeeping);
  }
  plan.region.bookkeeping.clear();
  plan.n = plan.region.size();
  const auto P = plan.P;
  const auto U = plan.tiles();
  plan.S = machine.allocate(U);
  plan.E = machine.allocate(U);
  plan.D = machine.allocate(U);

  std::vector<SpanState> state(P);
  std::vector<Program> progs;
  for (ProcId p = 0; p < P; ++p) progs.push_back(scan_phase(machine, p, &plan, &state[p]));
  run_all(machine, progs);
  for (ProcId p = 0; p < P; ++p) progs.push_back(zero_phase(machine, p, &plan));
  run_all(machine, progs);
  for (ProcId p = 0; p < P; ++p) progs.push_back(size_phase(machine, p, &plan, &state[p]));
  run_all(machine, progs);

  std::vector<std::int64_t> sums(P, 0);
  for (ProcId p = 0; p < P; ++p) progs.push_back(sum_phase(machine, p, &plan, &sums[p]));
  run_all(machine, progs);
  const auto prefix = prefix_sum(machine, sums);
  const auto total = static_cast<std::size_t>(prefix.back());
  for (ProcId p = 0; p < P; ++p) progs.push_back(offset_phase(machine, p, &plan, prefix[p] - sums[p]));
  run_all(machine, progs);

  if (destinations)
    for (std::size_t u = 0; u < U; ++u) destinations->push_back(machine.peek(at(plan.D, u)).at(0).value);

  plan.staging = machine.allocate(total);
  for (ProcId p = 0; p < P; ++p) progs.push_back(write_phase(machine, p, &plan, &state[p]));
  run_all(machine, progs);

  Run staged;
  for (std::size_t k = 0; k < total; ++k) {
    const auto size = machine.peek(at(plan.staging, k)).size();
    staged.slices.push_back({at(plan.staging, k), 0, static_cast<std::uint32_t>(size)});
  }
  return contract(machine, staged);
}

}  // namespace pemsim::detail

namespace pemsim {

Run finalize_nonparallel_reduce(Machine& machine, const MetaRunSet& meta, std::int64_t N_R) {
  std::vector<Run> runs;
  for (const auto& r : meta.runs)
    if (!r.empty()) runs.push_back(r);
  if (runs.empty()) return Run{};
  if (runs.size() == 1) {
    if (is_dense(runs[0], machine.config().block)) return runs[0];
    return contract(machine, runs[0]);
  }
  return detail::transpose_tiles(machine, runs, N_R);
}

}  // namespace pemsim
