#include <algorithm>
#include <numeric>

#include "shuffle_internal.hpp"

namespace pemsim {

using namespace detail;

namespace {

// What every processor may know about the layout being produced.
struct MapPlan {
  const ShuffleInstance* instance = nullptr;
  const Run* inputs = nullptr;
  std::size_t v = 1;
  std::size_t per_meta = 1;     // columns per meta-column
  std::size_t meta_count = 0;
  std::uint64_t id_base = 0;
  // Triple indices emitted for each meta-column, in row-major order. This is
  // the map function run in internal memory; the host only enumerates it.
  std::vector<std::vector<std::size_t>> emitted;
  BlockAddr table;              // T[c]: first output position of meta-column c
  BlockAddr out;
  std::size_t share = 0;        // output positions per processor, block aligned

  Run inputs_of(std::size_t c) const {
    const auto N_M = static_cast<std::size_t>(instance->N_M);
    const auto from = c * per_meta * v;
    const auto to = std::min(N_M, (c + 1) * per_meta) * v;
    return sub_run(*inputs, from, to);
  }
};

Program load_inputs(Machine& m, ProcId p, const MapPlan* plan, std::size_t c, std::vector<Element>* held) {
  for (const auto& s : plan->inputs_of(c).slices)
    for (auto a : read_slice(m, p, s, false, *held)) co_yield a;
}

Program volume_program(Machine& m, ProcId p, const MapPlan* plan, std::size_t c0, std::size_t c1,
                       std::vector<std::int64_t>* volume) {
  for (auto c = c0; c < c1; ++c) {
    std::vector<Element> held;
    for (auto a : load_inputs(m, p, plan, c, &held)) co_yield a;
    (*volume)[c] = static_cast<std::int64_t>(plan->emitted[c].size());
    m.discard(p, ids_of(held));
  }
}

Program table_program(Machine& m, ProcId p, const MapPlan* plan, std::size_t c0, std::size_t c1,
                      std::int64_t offset, const std::vector<std::int64_t>* volume) {
  for (auto c = c0; c < c1; ++c) {
    const auto entry = meta(m.fresh_id(), 0, 0, offset);
    materialize(m, p, {entry});
    co_yield output_of(BlockAddr{plan->table.index + c}, std::vector<Element>{entry});
    offset += (*volume)[c];
  }
}

Program read_entry(Machine& m, ProcId p, const MapPlan* plan, std::size_t c, std::int64_t* value) {
  std::vector<Element> seen;
  for (auto a : read_and_drop(m, p, BlockAddr{plan->table.index + c}, &seen)) co_yield a;
  *value = seen.at(0).value;
}

Program emit_program(Machine& m, ProcId p, const MapPlan* plan) {
  const auto B = m.config().block;
  const auto H = static_cast<std::int64_t>(plan->instance->triples.size());
  const auto G = plan->meta_count;
  const auto lo = static_cast<std::int64_t>(p * plan->share);
  const auto hi = std::min<std::int64_t>(H, static_cast<std::int64_t>((p + 1) * plan->share));
  if (lo >= hi) co_return;

  // Last meta-column starting at or before lo.
  std::size_t a = 0, b = G;
  std::int64_t start = 0;
  while (b - a > 1) {
    const auto mid = (a + b) / 2;
    std::int64_t value = 0;
    for (auto x : read_entry(m, p, plan, mid, &value)) co_yield x;
    if (value <= lo) a = mid; else b = mid;
  }
  for (auto x : read_entry(m, p, plan, a, &start)) co_yield x;

  std::vector<Element> buffer;
  std::optional<BlockAddr> parked;
  auto pos = lo;
  for (auto c = a; c < G && pos < hi; ++c) {
    std::int64_t end = H;
    if (c + 1 < G)
      for (auto x : read_entry(m, p, plan, c + 1, &end)) co_yield x;
    if (end > pos) {
      std::vector<Element> held;
      for (auto x : load_inputs(m, p, plan, c, &held)) co_yield x;
      if (parked) {
        co_yield Input{*parked, true};
        const auto back = m.last_input(p);
        buffer.assign(back.begin(), back.end());
        parked.reset();
      }
      const auto& triples = plan->instance->triples;
      for (auto r = pos - start; r < std::min(end, hi) - start; ++r) {
        const auto x = plan->emitted[c][r];
        const auto& t = triples[x];
        const auto input = std::find_if(held.begin(), held.end(), [&](const Element& e) {
          return e.j == t.j && e.k == t.k;
        });
        const Element e{plan->id_base + x, t.i, t.j, t.value * input->value, t.k, t.l, ElementKind::Data};
        materialize(m, p, {e});
        buffer.push_back(e);
        if (buffer.size() == B) {
          const auto block = (pos - static_cast<std::int64_t>(B) + 1) / static_cast<std::int64_t>(B);
          co_yield output_of(BlockAddr{plan->out.index + static_cast<std::uint64_t>(block)}, buffer);
          buffer.clear();
        }
        ++pos;
      }
      m.discard(p, ids_of(held));
      // A partial block waits on disk while the next meta-column's inputs load.
      if (!buffer.empty() && pos < hi) {
        parked = m.allocate();
        co_yield output_of(*parked, buffer);
        buffer.clear();
      }
    }
    start = end;
  }
  if (!buffer.empty())
    co_yield output_of(BlockAddr{plan->out.index + static_cast<std::uint64_t>((pos - 1) / static_cast<std::int64_t>(B))}, buffer);
}

}  // namespace

std::size_t meta_column_budget(std::size_t M, std::size_t B, std::size_t H, std::size_t P) {
  return std::min(M - B, ceil_div(H, P));
}

MetaRunSet prepare_parallel_map(Machine& machine, const ShuffleInstance& instance,
                                const Run& input, std::size_t m, std::size_t R) {
  const auto P = machine.processors();
  const auto& config = machine.config();
  const auto B = config.block;
  const auto H = instance.triples.size();
  const auto v = static_cast<std::size_t>(std::max(1, instance.v));
  if (m < B) throw PemError(ErrorKind::Precondition, "m must be at least B");
  if (m > config.memory - B) throw PemError(ErrorKind::Precondition, "m must leave one block of memory");
  if (m < v) throw PemError(ErrorKind::Precondition, "a meta-column must hold at least one column");
  if (H < P * B) throw PemError(ErrorKind::Precondition, "H/P must be at least B");
  R = std::max<std::size_t>(1, R);

  MapPlan plan;
  plan.instance = &instance;
  plan.inputs = &input;
  plan.v = v;
  plan.per_meta = m / v;
  plan.meta_count = ceil_div(static_cast<std::size_t>(instance.N_M), plan.per_meta);
  plan.id_base = machine.reserve_ids(H);
  plan.emitted.resize(plan.meta_count);
  for (std::size_t x = 0; x < H; ++x)
    plan.emitted[(instance.triples[x].j - 1) / plan.per_meta].push_back(x);
  for (auto& list : plan.emitted)
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      const auto &s = instance.triples[a], &t = instance.triples[b];
      return std::tie(s.i, s.j, a) < std::tie(t.i, t.j, b);
    });
  const auto G = plan.meta_count;

  // Volumes per meta-column, then a prefix sum over processors for offsets.
  const auto owned = balanced_split(G, P);
  std::vector<std::int64_t> volume(G, 0);
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p)
      progs.push_back(volume_program(machine, p, &plan, owned[p].first, owned[p].second, &volume));
    run_programs(machine, progs);
  }
  std::vector<std::int64_t> local(P, 0);
  for (ProcId p = 0; p < P; ++p)
    for (auto c = owned[p].first; c < owned[p].second; ++c) local[p] += volume[c];
  const auto prefix = prefix_sum(machine, local);
  plan.table = machine.allocate(G);
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p)
      progs.push_back(table_program(machine, p, &plan, owned[p].first, owned[p].second,
                                    prefix[p] - local[p], &volume));
    run_programs(machine, progs);
  }

  const auto blocks = ceil_div(H, B);
  plan.out = machine.allocate(blocks);
  plan.share = ceil_div(blocks, P) * B;
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) progs.push_back(emit_program(machine, p, &plan));
    run_programs(machine, progs);
  }

  const auto region = dense_run(plan.out, H, B);
  const auto per_meta = static_cast<std::int64_t>(plan.per_meta);
  const auto meta_of = [per_meta](const Element& e) { return (e.j - 1) / per_meta + 1; };
  std::vector<Run> columns;
  std::size_t start = 0;
  for (std::size_t c = 0; c < G; ++c) {
    const auto n = static_cast<std::size_t>(volume[c]);
    if (n == 0) continue;
    auto run = sub_run(region, start, start + n);
    run.bookkeeping.push_back(BlockAddr{plan.table.index + c});
    columns.push_back(std::move(run));
    start += n;
  }
  const auto d = merge_degree(H, P, config.memory, B);
  if (G <= R) {
    MetaRunSet out;
    out.R = R;
    out.d = d;
    out.runs = std::move(columns);
    return out;
  }
  if (G <= P) return parallel_merge_to_R(machine, std::move(columns), R, d);
  return balance_and_merge(machine, region, meta_of, static_cast<std::int64_t>(G), R, d, MergeConfig{});
}

}  // namespace pemsim
