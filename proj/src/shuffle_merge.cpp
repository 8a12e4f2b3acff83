#include <algorithm>
#include <cmath>

#include "shuffle_internal.hpp"

namespace pemsim {

namespace detail {

std::vector<std::pair<std::size_t, std::size_t>> balanced_split(std::size_t n, std::size_t P) {
  std::vector<std::pair<std::size_t, std::size_t>> out(P);
  for (std::size_t p = 0; p < P; ++p) out[p] = {p * n / P, (p + 1) * n / P};
  return out;
}

std::size_t fan_in_limit(const MachineConfig& config) {
  return std::max<std::size_t>(2, config.memory / config.block - 1);
}

bool is_sorted_run(const Machine& machine, const Run& run) {
  const auto elements = peek_run(machine, run);
  return std::is_sorted(elements.begin(), elements.end(), RowMajorLess{});
}

std::vector<Run> cut_region(const Machine& machine, const Run& region,
                            const std::function<bool(const Element&, const Element&)>& boundary) {
  const auto elements = peek_run(machine, region);
  std::vector<std::size_t> cuts;
  for (std::size_t x = 1; x < elements.size(); ++x)
    if (boundary(elements[x - 1], elements[x])) cuts.push_back(x);
  if (elements.empty()) return {};
  return split_run(region, cuts);
}

Program form_runs(Machine& m, ProcId p, Run chunk, bool consume, std::vector<Run>* out) {
  const auto M = m.config().memory;
  std::size_t x = 0;
  while (x < chunk.slices.size()) {
    std::vector<Element> load;
    while (x < chunk.slices.size() && load.size() + chunk.slices[x].size() <= M) {
      for (auto a : read_slice(m, p, chunk.slices[x], consume, load)) co_yield a;
      ++x;
    }
    std::sort(load.begin(), load.end(), RowMajorLess{});
    RunWriter writer(m, p);
    for (const auto& e : load) {
      writer.push(e);
      if (writer.full())
        for (auto a : writer.flush()) co_yield a;
    }
    for (auto a : writer.flush()) co_yield a;
    out->push_back(writer.run());
  }
}

namespace {

// Consecutive group sizes for one local pass. The last pass splits evenly;
// an earlier pass merges just enough runs that the following passes all run
// at full fan-in.
std::vector<std::size_t> pass_groups(std::size_t n, std::size_t target, std::size_t fan_in) {
  std::vector<std::size_t> sizes;
  const auto g = ceil_div(n, target);
  if (g <= fan_in) {
    for (std::size_t a = 0; a < n; a += g) sizes.push_back(std::min(g, n - a));
    return sizes;
  }
  auto cap = target;
  while (cap * fan_in < n) cap *= fan_in;
  auto reduce = n - cap;
  std::size_t used = 0;
  for (; reduce >= fan_in - 1; reduce -= fan_in - 1, used += fan_in) sizes.push_back(fan_in);
  if (reduce > 0) {
    sizes.push_back(reduce + 1);
    used += reduce + 1;
  }
  for (; used < n; ++used) sizes.push_back(1);
  return sizes;
}

}  // namespace

Program local_merge(Machine& m, ProcId p, std::vector<Run>* runs, std::size_t target,
                    std::size_t fan_in, bool consume, std::size_t* passes) {
  target = std::max<std::size_t>(1, target);
  while (runs->size() > target) {
    std::vector<Run> next;
    std::size_t from = 0;
    for (auto size : pass_groups(runs->size(), target, fan_in)) {
      const auto b = from + size;
      if (size == 1) {
        next.push_back((*runs)[from++]);
        continue;
      }
      std::vector<MergeInput> inputs;
      for (auto x = from; x < b; ++x) inputs.push_back(MergeInput{(*runs)[x], 0, {}, {}});
      from = b;
      Run merged;
      for (auto act : merge_program(m, p, std::move(inputs), MergeOptions{consume, false, {}}, merged))
        co_yield act;
      next.push_back(std::move(merged));
    }
    *runs = std::move(next);
    ++*passes;
  }
}

Program describe_runs(Machine& m, ProcId p, std::vector<Run>* runs) {
  for (auto& run : *runs)
    for (auto a : write_bookkeeping(m, p, run.size(), run)) co_yield a;
}

namespace {

Program local_program(Machine& m, ProcId p, std::vector<Run>* runs, std::size_t target,
                      std::size_t fan_in, bool consume, std::size_t* passes) {
  for (auto a : local_merge(m, p, runs, target, fan_in, consume, passes)) co_yield a;
  for (auto a : describe_runs(m, p, runs)) co_yield a;
}

Program scan_program(Machine& m, ProcId p, Run part) {
  for (const auto& s : part.slices) {
    std::vector<Element> got;
    for (auto a : read_slice(m, p, s, false, got)) co_yield a;
    m.discard(p, ids_of(got));
  }
}

}  // namespace

std::vector<Run> local_phase(Machine& machine, std::vector<std::vector<Run>> per_proc,
                             std::size_t R, bool consume, std::size_t* passes,
                             const std::vector<ProcId>* order) {
  const auto P = machine.processors();
  per_proc.resize(P);
  std::vector<std::size_t> count(P, 0);
  std::vector<Program> progs;
  const auto fan_in = fan_in_limit(machine.config());
  // The R runs allowed in total are shared among processors holding data.
  std::vector<ProcId> busy;
  for (ProcId p = 0; p < P; ++p)
    if (!per_proc[p].empty()) busy.push_back(p);
  std::vector<std::size_t> targets(P, 1);
  if (!busy.empty() && busy.size() <= R)
    for (std::size_t x = 0; x < busy.size(); ++x)
      targets[busy[x]] = R / busy.size() + (x < R % busy.size() ? 1 : 0);
  for (ProcId p = 0; p < P; ++p)
    progs.push_back(local_program(machine, p, &per_proc[p], targets[p], fan_in, consume, &count[p]));
  run_programs(machine, progs);
  std::vector<ProcId> sequence(P);
  for (ProcId p = 0; p < P; ++p) sequence[p] = p;
  if (order) sequence = *order;
  std::vector<Run> out;
  for (auto p : sequence)
    for (auto& r : per_proc[p])
      if (!r.empty()) out.push_back(std::move(r));
  if (passes) *passes = std::max(*passes, *std::max_element(count.begin(), count.end()));
  return out;
}

void scan_region(Machine& machine, const Run& region) {
  const auto P = machine.processors();
  std::vector<Run> parts;
  for (const auto& [from, to] : balanced_split(region.size(), P)) parts.push_back(sub_run(region, from, to));
  scan_parts(machine, parts);
}

void scan_parts(Machine& machine, const std::vector<Run>& parts) {
  std::vector<Program> progs;
  for (ProcId p = 0; p < parts.size(); ++p) progs.push_back(scan_program(machine, p, parts[p]));
  run_programs(machine, progs);
}

}  // namespace detail

using namespace detail;

std::size_t merge_degree(std::size_t H, std::size_t P, std::size_t M, std::size_t B) {
  const double a = static_cast<double>(H) / static_cast<double>(P * B);
  const double b = std::sqrt(static_cast<double>(H) / static_cast<double>(P));
  const double c = static_cast<double>(M) / static_cast<double>(B);
  return static_cast<std::size_t>(std::ceil(std::max(2.0, std::min({a, b, c}))));
}

std::size_t runs_for_sorted_reduce(std::size_t H, std::size_t N_R, std::size_t B) {
  return std::max<std::size_t>(1, H / (N_R * B));
}

std::size_t runs_for_parallel_reduce(std::size_t H, std::size_t N_R, std::size_t w, std::size_t B) {
  return std::max<std::size_t>(1, H / (N_R * std::max(w, B)));
}

Workspace make_workspace(const MachineConfig& config, const ShuffleInstance& instance) {
  const auto base = config.processors;
  Machine machine(config, pack_blocks(base, to_elements(instance), config.block));
  return Workspace{std::move(machine),
                   dense_run(BlockAddr{base}, instance.triples.size(), config.block)};
}

Workspace make_map_workspace(const MachineConfig& config, const ShuffleInstance& instance,
                             const std::vector<std::vector<std::int64_t>>& input) {
  std::vector<Element> elements;
  std::uint64_t id = 0;
  for (std::int64_t j = 1; j <= instance.N_M; ++j)
    for (std::int32_t k = 1; k <= instance.v; ++k)
      elements.push_back(Element{id++, 0, j, input.at(k - 1).at(j - 1), k, 0, ElementKind::Data});
  const auto base = config.processors;
  Machine machine(config, pack_blocks(base, elements, config.block));
  return Workspace{std::move(machine), dense_run(BlockAddr{base}, elements.size(), config.block)};
}

ShuffleInstance apply_map(const ShuffleInstance& instance,
                          const std::vector<std::vector<std::int64_t>>& input) {
  auto out = instance;
  for (auto& t : out.triples) t.value *= input.at(t.k - 1).at(t.j - 1);
  return out;
}

namespace {

Program merge_groups(Machine& m, ProcId p, std::vector<std::size_t> mine,
                     const std::vector<std::vector<Run>>* groups, std::vector<Run>* next,
                     bool consume) {
  for (auto gi : mine) {
    std::vector<MergeInput> inputs;
    for (const auto& r : (*groups)[gi]) inputs.push_back(MergeInput{r, 0, {}, {}});
    for (auto a : merge_program(m, p, std::move(inputs), MergeOptions{consume, true, {}}, (*next)[gi]))
      co_yield a;
  }
}

// Processors per group, at least one each, the rest proportional to volume.
std::vector<std::size_t> share_processors(const std::vector<std::size_t>& volume, std::size_t P) {
  const auto G = volume.size();
  std::size_t total = 0;
  for (auto v : volume) total += v;
  std::vector<std::size_t> q(G, 1);
  const auto spare = P - G;
  std::size_t used = 0;
  std::vector<std::pair<double, std::size_t>> remainder;
  for (std::size_t g = 0; g < G; ++g) {
    const double exact = total ? static_cast<double>(spare) * volume[g] / total : 0.0;
    const auto whole = static_cast<std::size_t>(exact);
    q[g] += whole;
    used += whole;
    remainder.emplace_back(exact - whole, g);
  }
  std::sort(remainder.begin(), remainder.end(), std::greater<>());
  for (std::size_t x = 0; used < spare && x < remainder.size(); ++x, ++used) ++q[remainder[x].second];
  return q;
}

}  // namespace

MetaRunSet parallel_merge_to_R(Machine& machine, std::vector<Run> runs, std::size_t R,
                               std::size_t d, MergeConfig config) {
  const auto P = machine.processors();
  const auto B = machine.config().block;
  R = std::max<std::size_t>(1, R);
  d = std::clamp<std::size_t>(d, 2, fan_in_limit(machine.config()));
  for (const auto& r : runs)
    if (!is_sorted_run(machine, r)) throw PemError(ErrorKind::Precondition, "input run is not sorted");
  std::erase_if(runs, [](const Run& r) { return r.empty(); });

  MetaRunSet out;
  out.R = R;
  out.d = d;
  while (runs.size() > R) {
    const auto target = std::max(R, ceil_div(runs.size(), d));
    const auto g = ceil_div(runs.size(), target);
    std::vector<std::vector<Run>> groups;
    std::vector<std::size_t> volume;
    std::size_t total = 0;
    for (std::size_t a = 0; a < runs.size(); a += g) {
      groups.emplace_back(runs.begin() + a, runs.begin() + std::min(runs.size(), a + g));
      std::size_t v = 0;
      for (const auto& r : groups.back()) v += r.size();
      volume.push_back(v);
      total += v;
    }
    const auto G = groups.size();
    std::vector<Run> next(G);

    if (G >= P || config.copy_free) {
      std::vector<std::vector<std::size_t>> mine(P);
      std::size_t start = 0;
      for (std::size_t gi = 0; gi < G; ++gi) {
        const auto owner = total ? std::min(P - 1, start * P / total) : gi % P;
        mine[owner].push_back(gi);
        start += volume[gi];
      }
      std::vector<Program> progs;
      for (ProcId p = 0; p < P; ++p)
        progs.push_back(merge_groups(machine, p, mine[p], &groups, &next, config.copy_free));
      run_programs(machine, progs);
    } else {
      const auto q = share_processors(volume, P);
      std::vector<std::vector<Run>> pieces(G);
      std::vector<std::vector<ProcId>> members(G);
      std::vector<Program> progs(P);
      ProcId proc = 0;
      for (std::size_t gi = 0; gi < G; ++gi) {
        pieces[gi].resize(q[gi]);
        for (std::size_t r = 0; r < q[gi]; ++r, ++proc) {
          members[gi].push_back(proc);
          progs[proc] = split_merge_program(machine, proc, &groups[gi], r, q[gi], pieces[gi][r]);
        }
      }
      run_programs(machine, progs);

      // Piece descriptors are gathered into shared blocks, B per block.
      std::vector<std::vector<ProcId>> chunks;
      std::vector<std::vector<std::vector<Element>>> held;
      std::vector<BlockAddr> chunk_out;
      std::vector<std::size_t> chunk_group;
      for (std::size_t gi = 0; gi < G; ++gi) {
        for (std::size_t a = 0; a < q[gi]; a += B) {
          const auto b = std::min(q[gi], a + B);
          chunks.emplace_back(members[gi].begin() + a, members[gi].begin() + b);
          held.emplace_back();
          for (auto x = a; x < b; ++x) {
            auto record = meta(machine.fresh_id(), 0, 0, static_cast<std::int64_t>(pieces[gi][x].size()));
            materialize(machine, members[gi][x], {record});
            held.back().push_back({record});
          }
          chunk_out.push_back(machine.allocate());
          chunk_group.push_back(gi);
        }
      }
      const CombineFn none;
      progs.clear();
      progs.resize(P);
      for (std::size_t c = 0; c < chunks.size(); ++c)
        for (std::size_t x = 0; x < chunks[c].size(); ++x)
          progs[chunks[c][x]] =
              gather_program(machine, chunks[c][x], x, &chunks[c], &held[c][x], &none, chunk_out[c]);
      run_programs(machine, progs);
      for (std::size_t gi = 0; gi < G; ++gi)
        for (auto& piece : pieces[gi]) next[gi].slices.insert(next[gi].slices.end(), piece.slices.begin(), piece.slices.end());
      for (std::size_t c = 0; c < chunks.size(); ++c) next[chunk_group[c]].bookkeeping.push_back(chunk_out[c]);
    }
    runs = std::move(next);
    ++out.rounds;
  }
  out.runs = std::move(runs);
  return out;
}

}  // namespace pemsim
