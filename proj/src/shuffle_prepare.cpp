#include <algorithm>
#include <map>
#include <numeric>

#include "pemsim/primitives.hpp"
#include "shuffle_internal.hpp"

namespace pemsim {

using namespace detail;

namespace {

void require_volume(const Machine& machine, std::size_t H) {
  if (H < machine.processors() * machine.config().block)
    throw PemError(ErrorKind::Precondition, "H/P must be at least B");
}

void require_layout(const ShuffleInstance& instance, LayoutKind kind) {
  if (instance.layout.kind != kind)
    throw PemError(ErrorKind::Precondition, "layout " + to_string(instance.layout) + " not accepted here");
}

// Address and offset of every element position of a run.
std::vector<std::pair<BlockAddr, std::uint32_t>> positions(const Run& run) {
  std::vector<std::pair<BlockAddr, std::uint32_t>> out;
  for (const auto& s : run.slices)
    for (auto x = s.lo; x < s.hi; ++x) out.emplace_back(s.addr, x);
  return out;
}

Program direct_program(Machine& m, ProcId p, std::size_t first, std::size_t last,
                       const std::vector<std::size_t>* source_of_rank,
                       const std::vector<std::pair<BlockAddr, std::uint32_t>>* where,
                       const std::vector<Element>* elements, BlockAddr out) {
  const auto B = m.config().block;
  const auto H = source_of_rank->size();
  for (auto b = first; b < last; ++b) {
    const auto lo = b * B, hi = std::min(H, lo + B);
    std::vector<BlockAddr> sources;
    std::map<BlockAddr, std::vector<std::uint64_t>> wanted;
    for (auto r = lo; r < hi; ++r) {
      const auto x = (*source_of_rank)[r];
      const auto addr = (*where)[x].first;
      if (!wanted.count(addr)) sources.push_back(addr);
      wanted[addr].push_back((*elements)[x].id);
    }
    for (auto addr : sources) {
      co_yield Input{addr, false};
      const auto& keep = wanted[addr];
      std::vector<std::uint64_t> drop;
      for (const auto& e : m.last_input(p))
        if (std::find(keep.begin(), keep.end(), e.id) == keep.end()) drop.push_back(e.id);
      m.discard(p, drop);
    }
    std::vector<Element> block;
    for (auto r = lo; r < hi; ++r) block.push_back((*elements)[(*source_of_rank)[r]]);
    co_yield output_of(BlockAddr{out.index + b}, block);
  }
}

Program form_program(Machine& m, ProcId p, Run chunk, bool consume, std::vector<Run>* out) {
  for (auto a : form_runs(m, p, std::move(chunk), consume, out)) co_yield a;
}

MetaRunSet unordered_impl(Machine& machine, const Run& input, std::size_t R, const MergeConfig& config) {
  const auto P = machine.processors();
  const auto H = input.size();
  std::vector<std::vector<Run>> per_proc(P);
  {
    const auto split = balanced_split(input.slices.size(), P);
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) {
      Run chunk;
      chunk.slices.assign(input.slices.begin() + split[p].first, input.slices.begin() + split[p].second);
      progs.push_back(form_program(machine, p, std::move(chunk), config.copy_free, &per_proc[p]));
    }
    run_programs(machine, progs);
  }
  std::size_t passes = 0;
  auto runs = local_phase(machine, std::move(per_proc), R, config.copy_free, &passes);
  auto out = parallel_merge_to_R(machine, std::move(runs), R, degree_for(machine, H, config), config);
  out.local_passes = passes;
  return out;
}

}  // namespace

namespace detail {

MetaRunSet balance_and_merge(Machine& machine, const Run& region, const KeyOf& key_of,
                             std::int64_t keys, std::size_t R, std::size_t d, const MergeConfig& config) {
  const auto P = machine.processors();
  const auto new_key = [&](const Element& a, const Element& b) { return key_of(a) != key_of(b); };
  if (static_cast<std::size_t>(keys) <= P) {
    // No processor would merge locally; the key runs go straight to the
    // parallel rounds once a pass has found their boundaries.
    scan_region(machine, region);
    return parallel_merge_to_R(machine, cut_region(machine, region, new_key), R, d, config);
  }
  const auto assignment = range_bounded_load_balance(machine, region, key_of, keys);
  std::vector<Run> parts(P);
  std::vector<std::vector<Run>> per_proc(P);
  for (ProcId p = 0; p < P; ++p) {
    const auto& s = assignment.spans[p];
    if (s.length == 0) continue;
    parts[p] = sub_run(region, s.start, s.start + s.length);
    per_proc[p] = cut_region(machine, parts[p], new_key);
  }
  // Key boundaries inside a span are found by one pass over it.
  scan_parts(machine, parts);

  std::vector<ProcId> order(P);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ProcId a, ProcId b) {
    return assignment.spans[a].start < assignment.spans[b].start;
  });
  std::size_t passes = 0;
  auto runs = local_phase(machine, std::move(per_proc), R, false, &passes, &order);
  auto out = parallel_merge_to_R(machine, std::move(runs), R, d, config);
  out.local_passes = passes;
  return out;
}

std::size_t degree_for(const Machine& machine, std::size_t H, const MergeConfig& config) {
  if (config.degree) return config.degree;
  const auto& c = machine.config();
  return merge_degree(H, c.processors, c.memory, c.block);
}

}  // namespace detail

Run direct_shuffle(Machine& machine, const ShuffleInstance& instance, const Run& input) {
  (void)instance;
  const auto H = input.size();
  require_volume(machine, H);
  const auto P = machine.processors();
  const auto B = machine.config().block;
  const auto elements = peek_run(machine, input);
  const auto where = positions(input);
  std::vector<std::size_t> source_of_rank(H);
  std::iota(source_of_rank.begin(), source_of_rank.end(), 0);
  std::sort(source_of_rank.begin(), source_of_rank.end(), [&](std::size_t a, std::size_t b) {
    return RowMajorLess{}(elements[a], elements[b]);
  });

  const auto blocks = ceil_div(H, B);
  const auto out = machine.allocate(blocks);
  const auto split = balanced_split(blocks, P);
  std::vector<Program> progs;
  for (ProcId p = 0; p < P; ++p)
    progs.push_back(direct_program(machine, p, split[p].first, split[p].second, &source_of_rank,
                                   &where, &elements, out));
  run_programs(machine, progs);
  return dense_run(out, H, B);
}

MetaRunSet prepare_unordered_map(Machine& machine, const ShuffleInstance& instance,
                                 const Run& input, std::size_t R, MergeConfig config) {
  require_layout(instance, LayoutKind::MixedColumn);
  require_volume(machine, input.size());
  return unordered_impl(machine, input, std::max<std::size_t>(1, R), config);
}

MetaRunSet prepare_sorted_map(Machine& machine, const ShuffleInstance& instance,
                              const Run& input, std::size_t R, MergeConfig config) {
  require_layout(instance, LayoutKind::ColumnMajor);
  const auto H = input.size();
  require_volume(machine, H);
  R = std::max<std::size_t>(1, R);
  const auto B = machine.config().block;
  if (config.copy_free || H < static_cast<std::size_t>(instance.N_R) * B)
    return unordered_impl(machine, input, R, config);

  const auto new_column = [](const Element& a, const Element& b) { return a.j != b.j; };
  if (static_cast<std::size_t>(instance.N_M) <= R) {
    scan_region(machine, input);
    MetaRunSet out;
    out.R = R;
    out.d = degree_for(machine, H, config);
    out.runs = cut_region(machine, input, new_column);
    return out;
  }

  return balance_and_merge(machine, input, [](const Element& e) { return e.j; }, instance.N_M, R,
                           degree_for(machine, H, config), config);
}

Run complete_sort(Machine& machine, const ShuffleInstance& instance, const Run& input,
                  MergeConfig config) {
  require_volume(machine, input.size());
  if (instance.layout.kind == LayoutKind::RowMajor) {
    scan_region(machine, input);
    if (!is_sorted_run(machine, input))
      throw PemError(ErrorKind::Precondition, "row-major input is not sorted");
    return input;
  }
  const auto meta = instance.layout.kind == LayoutKind::ColumnMajor && !config.copy_free
                        ? prepare_sorted_map(machine, instance, input, 1, config)
                        : unordered_impl(machine, input, 1, config);
  const auto& run = meta.runs.front();
  return is_dense(run, machine.config().block) ? run : contract(machine, run);
}

}  // namespace pemsim
