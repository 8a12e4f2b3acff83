#include "pemsim/primitives.hpp"

#include <algorithm>

#include "pemsim/program.hpp"
#include "scripts.hpp"

namespace pemsim {

using namespace detail;

namespace {

void replace_held(Machine& m, ProcId p, const std::vector<Element>& old_held,
                  const std::vector<Element>& new_held) {
  m.discard(p, ids_of(old_held));
  materialize(m, p, new_held);
}

Program scan_node(Machine& m, ProcId p, std::int64_t value, const ScanOp* op,
                  std::int64_t* result) {
  const auto P = m.processors();
  auto mine = meta(m.fresh_id(), 0, 0, value);
  materialize(m, p, {mine});
  for (std::size_t t = 0; t < ceil_log2(P); ++t) {
    const std::size_t dist = std::size_t{1} << t;
    if (p + dist < P) {
      materialize(m, p, {mine});
      co_yield output_of(m.inbox(p), std::vector<Element>{mine});
    } else {
      co_yield Idle{};
    }
    if (p >= dist) {
      co_yield Input{m.inbox(p - dist), true};
      const auto recv = m.last_input(p).front();
      auto updated = meta(mine.id, 0, 0, (*op)(recv.value, mine.value));
      replace_held(m, p, {recv, mine}, {updated});
      mine = updated;
    } else {
      co_yield Idle{};
    }
  }
  m.discard(p, std::vector<std::uint64_t>{mine.id});
  *result = mine.value;
}

}  // namespace

BlockAddr gather(Machine& machine, const std::vector<ProcId>& participants,
                 const std::vector<std::vector<Element>>& contributions, const CombineFn& combine) {
  if (contributions.size() != participants.size())
    throw PemError(ErrorKind::Precondition, "one contribution per participant expected");
  std::size_t total = 0;
  for (const auto& c : contributions) total += c.size();
  if (!combine && total > machine.config().block)
    throw PemError(ErrorKind::Overflow, "gathered contributions exceed one block");

  std::vector<ProcId> order;
  std::vector<std::vector<Element>> held;
  for (std::size_t x = 0; x < participants.size(); ++x) {
    if (!combine && contributions[x].empty()) continue;
    materialize(machine, participants[x], contributions[x]);
    order.push_back(participants[x]);
    held.push_back(contributions[x]);
  }
  const auto out = machine.allocate();
  if (order.empty()) {
    // Nothing to gather: the result is an empty block written by the first participant.
    if (participants.empty()) throw PemError(ErrorKind::Precondition, "no participants");
    std::vector<Program> progs(machine.processors());
    progs[participants.front()] = write_elements(machine, participants.front(), out, {});
    run_programs(machine, progs);
    return out;
  }
  std::vector<Program> progs(machine.processors());
  for (std::size_t x = 0; x < order.size(); ++x)
    progs[order[x]] = gather_program(machine, order[x], x, &order, &held[x], &combine, out);
  run_programs(machine, progs);
  return out;
}

std::vector<std::vector<Element>> scatter(Machine& machine, BlockAddr source,
                                          const std::vector<ProcId>& targets, ScatterMode mode) {
  std::vector<std::vector<Element>> received(targets.size());
  if (targets.empty()) return received;
  std::vector<Program> progs(machine.processors());
  for (std::size_t x = 0; x < targets.size(); ++x) {
    if (mode == ScatterMode::Direct)
      progs[targets[x]] = read_slice(machine, targets[x], Slice{source, 0, UINT32_MAX}, false,
                                     received[x]);
    else
      progs[targets[x]] =
          broadcast_program(machine, targets[x], x, &targets, source, false, received[x]);
  }
  run_programs(machine, progs);
  return received;
}

std::vector<std::int64_t> prefix_sum(Machine& machine, const std::vector<std::int64_t>& values,
                                     const ScanOp& op) {
  const auto P = machine.processors();
  if (values.size() != P)
    throw PemError(ErrorKind::Precondition, "prefix_sum needs one value per processor");
  std::vector<std::int64_t> result(P);
  std::vector<Program> progs;
  for (ProcId p = 0; p < P; ++p) progs.push_back(scan_node(machine, p, values[p], &op, &result[p]));
  run_programs(machine, progs);
  return result;
}

}  // namespace pemsim

namespace pemsim {

namespace {

struct BalanceShared {
  const Run* region;
  const KeyOf* key_of;
  std::size_t chunk;
  std::int64_t range_keys;
  std::size_t volume_procs;
  std::vector<Span>* spans;
  // Per volume processor: list blocks written, as (inbox owner, member set).
  std::vector<std::vector<std::pair<BlockAddr, std::vector<ProcId>>>>* lists;
};

std::int64_t range_of(std::int64_t key, std::int64_t s) { return (key - 1) / s; }

std::int64_t range_lo(std::int64_t r, std::int64_t s) { return r * s + 1; }

Program volume_scan(Machine& m, ProcId v, BalanceShared sh) {
  const auto n = sh.region->size();
  const auto from = std::min(n, v * sh.chunk);
  const auto to = std::min(n, from + sh.chunk);
  auto& mine = (*sh.spans)[v];
  mine = Span{from, 0, 0, 0, SpanRole::Volume};
  if (from == to) co_return;

  std::optional<std::int64_t> prev_range;
  if (from > 0) {
    std::vector<Element> got;
    for (auto a : read_slice(m, v, sub_run(*sh.region, from - 1, from).slices.front(), false, got))
      co_yield a;
    prev_range = range_of((*sh.key_of)(got.front()), sh.range_keys);
    m.discard(v, ids_of(got));
  }

  const auto B = m.config().block;
  std::vector<Element> pending;  // list records not yet written
  std::optional<std::pair<std::int64_t, std::size_t>> open;  // range, start
  std::size_t kept_end = to;
  auto close = [&](std::size_t end) {
    pending.push_back(meta(m.fresh_id(), open->first, static_cast<std::int64_t>(open->second),
                           static_cast<std::int64_t>(end)));
    materialize(m, v, {pending.back()});
  };
  auto list_block = [&] {
    const auto take = std::min(B, pending.size());
    std::vector<Element> block(pending.begin(), pending.begin() + take);
    pending.erase(pending.begin(), pending.begin() + take);
    std::vector<ProcId> members;
    for (const auto& e : block) members.push_back(sh.volume_procs + e.i - 1);
    (*sh.lists)[v].emplace_back(m.inbox(members.front()), members);
    return output_of(m.inbox(members.front()), block);
  };

  std::size_t pos = from;
  for (const auto& s : sub_run(*sh.region, from, to).slices) {
    std::vector<Element> got;
    for (auto a : read_slice(m, v, s, false, got)) co_yield a;
    for (const auto& e : got) {
      const auto r = range_of((*sh.key_of)(e), sh.range_keys);
      if (pos == from) {
        mine.key_lo = range_lo(r, sh.range_keys);
        mine.key_hi = mine.key_lo + sh.range_keys - 1;
      }
      if (prev_range && *prev_range != r) {
        if (open)
          close(pos);
        else
          kept_end = pos;
        open = {r, pos};
      }
      prev_range = r;
      ++pos;
    }
    m.discard(v, ids_of(got));
    if (pending.size() >= B) co_yield list_block();
  }
  if (open) close(to);
  while (!pending.empty()) co_yield list_block();
  mine.length = kept_end - from;
}

Program range_receive(Machine& m, ProcId p, std::size_t position,
                      const std::vector<ProcId>* members, BlockAddr source, BalanceShared sh) {
  std::vector<Element> received;
  for (auto a : broadcast_program(m, p, position, members, source, true, received)) co_yield a;
  for (const auto& e : received) {
    if (sh.volume_procs + e.i - 1 != p) continue;
    auto& span = (*sh.spans)[p];
    span.start = static_cast<std::size_t>(e.j);
    span.length = static_cast<std::size_t>(e.value - e.j);
    span.key_lo = range_lo(e.i, sh.range_keys);
    span.key_hi = span.key_lo + sh.range_keys - 1;
  }
  m.discard(p, ids_of(received));
}

}  // namespace

namespace {

struct ContractShared {
  const Run* region;
  std::size_t per_proc;  // slices per processor
  std::vector<std::size_t> counts;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  BlockAddr out;
  BlockAddr slots;
};

std::pair<std::size_t, std::size_t> slice_range(const ContractShared& sh, ProcId p) {
  const auto S = sh.region->slices.size();
  return {std::min(S, p * sh.per_proc), std::min(S, (p + 1) * sh.per_proc)};
}

std::size_t head_size(const ContractShared& sh, ProcId p, std::size_t B) {
  const auto mis = sh.offsets[p] % B;
  return mis == 0 ? 0 : std::min(sh.counts[p], B - mis);
}

Program contract_count(Machine& m, ProcId p, ContractShared* sh) {
  const auto [a, b] = slice_range(*sh, p);
  for (auto x = a; x < b; ++x) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, sh->region->slices[x], false, got)) co_yield act;
    sh->counts[p] += got.size();
    m.discard(p, ids_of(got));
  }
}

Program contract_total(Machine& m, ProcId p, const std::vector<ProcId>* order, BlockAddr tmp,
                       std::size_t position, std::size_t total) {
  if (position == 0) {
    auto record = meta(m.fresh_id(), 0, 0, static_cast<std::int64_t>(total));
    materialize(m, p, {record});
    co_yield output_of(tmp, std::vector<Element>{record});
  } else {
    co_yield Idle{};
  }
  std::vector<Element> received;
  for (auto act : broadcast_program(m, p, position, order, tmp, true, received)) co_yield act;
  m.discard(p, ids_of(received));
}

Program contract_heads(Machine& m, ProcId p, const ContractShared* sh) {
  const auto B = m.config().block;
  if (sh->offsets[p] % B == 0) co_return;
  const auto want = head_size(*sh, p, B);
  std::vector<Element> head;
  const auto [a, b] = slice_range(*sh, p);
  for (auto x = a; x < b && head.size() < want; ++x) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, sh->region->slices[x], false, got)) co_yield act;
    const auto keep = std::min(got.size(), want - head.size());
    head.insert(head.end(), got.begin(), got.begin() + keep);
    m.discard(p, ids_of(std::vector<Element>(got.begin() + keep, got.end())));
  }
  co_yield output_of(BlockAddr{sh->slots.index + p}, head);
}

Program contract_body(Machine& m, ProcId p, const ContractShared* sh) {
  const auto B = m.config().block;
  const auto P = m.processors();
  auto skip = head_size(*sh, p, B);
  if (skip == sh->counts[p]) co_return;
  std::size_t pos = sh->offsets[p] + skip;
  std::vector<Element> buffer;
  const auto [a, b] = slice_range(*sh, p);
  for (auto x = a; x < b; ++x) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, sh->region->slices[x], false, got)) co_yield act;
    const auto drop = std::min(skip, got.size());
    m.discard(p, ids_of(std::vector<Element>(got.begin(), got.begin() + drop)));
    skip -= drop;
    buffer.insert(buffer.end(), got.begin() + drop, got.end());
    while (buffer.size() >= B) {
      std::vector<Element> block(buffer.begin(), buffer.begin() + B);
      buffer.erase(buffer.begin(), buffer.begin() + B);
      co_yield output_of(BlockAddr{sh->out.index + pos / B}, block);
      pos += B;
    }
  }
  if (buffer.empty()) co_return;
  const auto need = std::min(B, sh->total - pos);
  for (ProcId q = p + 1; q < P && buffer.size() < need; ++q) {
    co_yield Input{BlockAddr{sh->slots.index + q}, true};
    const auto got = m.last_input(p);
    buffer.insert(buffer.end(), got.begin(), got.end());
  }
  co_yield output_of(BlockAddr{sh->out.index + pos / B}, buffer);
}

}  // namespace

Run contract(Machine& machine, const Run& region) {
  const auto P = machine.processors();
  const auto B = machine.config().block;
  ContractShared sh;
  sh.region = &region;
  sh.per_proc = ceil_div(std::max<std::size_t>(region.slices.size(), 1), P);
  sh.counts.assign(P, 0);
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) progs.push_back(contract_count(machine, p, &sh));
    run_programs(machine, progs);
  }
  std::vector<std::int64_t> counts(sh.counts.begin(), sh.counts.end());
  const auto incl = prefix_sum(machine, counts);
  sh.offsets.resize(P);
  for (ProcId p = 0; p < P; ++p) sh.offsets[p] = static_cast<std::size_t>(incl[p]) - sh.counts[p];
  sh.total = static_cast<std::size_t>(incl.back());
  if (sh.total == 0) return Run{};

  if (P > 1) {
    std::vector<ProcId> order{P - 1};
    for (ProcId p = 0; p + 1 < P; ++p) order.push_back(p);
    const auto tmp = machine.allocate();
    std::vector<Program> progs(P);
    for (std::size_t x = 0; x < P; ++x)
      progs[order[x]] = contract_total(machine, order[x], &order, tmp, x, sh.total);
    run_programs(machine, progs);
  }

  sh.out = machine.allocate(ceil_div(sh.total, B));
  sh.slots = machine.allocate(P);
  for (auto phase : {contract_heads, contract_body}) {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) progs.push_back(phase(machine, p, &sh));
    run_programs(machine, progs);
  }
  return dense_run(sh.out, sh.total, B);
}

Assignment range_bounded_load_balance(Machine& machine, const Run& region, const KeyOf& key_of,
                                      std::int64_t m) {
  const auto P = machine.processors();
  const auto n = region.size();
  const auto host = peek_run(machine, region);
  for (std::size_t x = 0; x < host.size(); ++x) {
    const auto key = key_of(host[x]);
    if (key < 1 || key > m) throw PemError(ErrorKind::Domain, "key outside 1..m");
    if (x > 0 && key_of(host[x - 1]) > key)
      throw PemError(ErrorKind::Precondition, "region is not sorted by key");
  }

  Assignment result;
  result.spans.assign(P, Span{n, 0, 0, 0, SpanRole::Range});
  const auto before = machine.parallel_io_count();
  if (P == 1) {
    result.spans[0] = Span{0, n, host.empty() ? 0 : key_of(host.front()),
                           host.empty() ? 0 : key_of(host.back()), SpanRole::Volume};
    return result;
  }

  const auto V = ceil_div(P, 2);
  std::vector<std::vector<std::pair<BlockAddr, std::vector<ProcId>>>> lists(V);
  BalanceShared sh{&region,
                   &key_of,
                   ceil_div(2 * n, P),
                   static_cast<std::int64_t>(ceil_div(static_cast<std::size_t>(2 * m), P)),
                   V,
                   &result.spans,
                   &lists};
  {
    std::vector<Program> progs(P);
    for (ProcId v = 0; v < V; ++v) progs[v] = volume_scan(machine, v, sh);
    run_programs(machine, progs);
  }
  {
    std::vector<Program> progs(P);
    for (const auto& per_volume : lists)
      for (const auto& [source, members] : per_volume)
        for (std::size_t x = 0; x < members.size(); ++x)
          progs[members[x]] = range_receive(machine, members[x], x, &members, source, sh);
    run_programs(machine, progs);
  }
  for (auto& span : result.spans)
    if (span.length == 0) span.start = n;
  result.ios = machine.parallel_io_count() - before;
  return result;
}

}  // namespace pemsim
