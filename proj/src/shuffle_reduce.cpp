#include <algorithm>
#include <map>

#include "shuffle_internal.hpp"

namespace pemsim {

using namespace detail;

namespace {

// Running reduction by output index l. Every partial value is an element in
// the processor's memory; folding an element replaces it.
class Accumulator {
 public:
  Accumulator(Machine& m, ProcId p, const ReduceOp* op) : m_(m), p_(p), op_(op) {}

  void fold(const Element& e, std::int64_t row) {
    auto it = acc_.find(e.l);
    auto value = e.value;
    std::vector<std::uint64_t> gone{e.id};
    if (it != acc_.end()) {
      value = op_->combine(it->second.value, value);
      gone.push_back(it->second.id);
    }
    m_.discard(p_, gone);
    const auto next = meta(m_.fresh_id(), row, e.l, value, 0, e.l);
    materialize(m_, p_, {next});
    acc_[e.l] = next;
  }
  bool empty() const { return acc_.empty(); }
  std::size_t size() const { return acc_.size(); }
  // Partial values in l order; the elements stay resident.
  std::vector<Element> take() {
    std::vector<Element> out;
    for (auto& [l, e] : acc_) out.push_back(e);
    acc_.clear();
    return out;
  }

 private:
  Machine& m_;
  ProcId p_;
  const ReduceOp* op_;
  std::map<std::int32_t, Element> acc_;
};

struct SpanLayout {
  Run region;
  std::size_t n = 0, P = 1;
  std::vector<std::size_t> run_start;
  std::size_t bound(std::size_t p) const { return p * n / P; }
  std::size_t run_of(std::size_t x) const {
    return static_cast<std::size_t>(std::upper_bound(run_start.begin(), run_start.end(), x) - run_start.begin()) - 1;
  }
};

Program emit(RunWriter& writer, std::vector<Element> elements) {
  for (const auto& e : elements) {
    writer.push(e);
    if (writer.full())
      for (auto a : writer.flush()) co_yield a;
  }
}

// Reduces every (run, row) tile of the span to one partial per output index.
// Pieces are cut at run changes so each belongs to a single run.
Program partial_program(Machine& m, ProcId p, const SpanLayout* layout, const ReduceOp* op,
                        std::vector<std::pair<std::size_t, Run>>* pieces) {
  const auto a = layout->bound(p), b = layout->bound(p + 1);
  if (a == b) co_return;
  Accumulator acc(m, p, op);
  std::optional<std::pair<std::size_t, std::int64_t>> tile;
  std::optional<RunWriter> writer;
  std::size_t x = a;
  for (const auto& s : sub_run(layout->region, a, b).slices) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, s, false, got)) co_yield act;
    for (const auto& e : got) {
      const std::pair<std::size_t, std::int64_t> here{layout->run_of(x), e.i};
      if (tile && *tile != here) {
        for (auto act : emit(*writer, acc.take())) co_yield act;
        if (here.first != tile->first) {
          for (auto act : writer->flush()) co_yield act;
          pieces->emplace_back(tile->first, writer->run());
          writer.reset();
        }
      }
      if (!writer) writer.emplace(m, p);
      tile = here;
      acc.fold(e, e.i);
      ++x;
    }
  }
  for (auto act : emit(*writer, acc.take())) co_yield act;
  for (auto act : writer->flush()) co_yield act;
  pieces->emplace_back(tile->first, writer->run());
}

struct CombineState {
  std::optional<Accumulator> acc;
  std::optional<RunWriter> writer;
  std::int64_t open_row = 0;
  bool owns_open_row = false;  // last row continues into later spans
};

struct SlotPlan {
  BlockAddr base;
  std::size_t blocks_per_slot = 1;
  BlockAddr slot(std::size_t p) const { return BlockAddr{base.index + p * blocks_per_slot}; }
};

Program row_at(Machine& m, ProcId p, const SpanLayout* layout, std::size_t x, std::int64_t* row) {
  std::vector<Element> got;
  for (auto a : read_slice(m, p, sub_run(layout->region, x, x + 1).slices.at(0), false, got)) co_yield a;
  *row = got.at(0).i;
  m.discard(p, ids_of(got));
}

// Slot layout: a marker (row, partial count, continues) then the partials.
Program write_slot(Machine& m, ProcId p, const SlotPlan* slots, std::int64_t row, bool continues,
                   std::vector<Element> partials) {
  const auto B = m.config().block;
  std::vector<Element> block{meta(m.fresh_id(), row, static_cast<std::int64_t>(partials.size()), continues ? 1 : 0)};
  materialize(m, p, block);
  std::size_t k = 0;
  for (const auto& e : partials) {
    if (block.size() == B) {
      co_yield output_of(BlockAddr{slots->slot(p).index + k++}, block);
      block.clear();
    }
    block.push_back(e);
  }
  co_yield output_of(BlockAddr{slots->slot(p).index + k}, block);
}

Program write_results(Machine& m, ProcId p, RunWriter& writer, std::vector<Element> partials) {
  std::vector<Element> results;
  for (const auto& e : partials) results.push_back(Element{m.fresh_id(), e.i, e.l, e.value, 0, e.l, ElementKind::Data});
  m.discard(p, ids_of(partials));
  materialize(m, p, results);
  for (auto a : emit(writer, std::move(results))) co_yield a;
}

// Results for rows that start inside the span are written here, except a
// last row that runs on into later spans. A first row that began earlier is
// left in this processor's slot for the row's owner.
Program combine_program(Machine& m, ProcId p, const SpanLayout* layout, const ReduceOp* op,
                        const SlotPlan* slots, CombineState* state) {
  const auto a = layout->bound(p), b = layout->bound(p + 1);
  if (a == b) co_return;
  std::int64_t before = 0, after = 0;
  if (a > 0)
    for (auto act : row_at(m, p, layout, a - 1, &before)) co_yield act;
  if (b < layout->n)
    for (auto act : row_at(m, p, layout, b, &after)) co_yield act;

  state->acc.emplace(m, p, op);
  state->writer.emplace(m, p);
  auto& acc = *state->acc;
  auto& writer = *state->writer;
  std::optional<std::int64_t> row;
  bool first = true;
  for (const auto& s : sub_run(layout->region, a, b).slices) {
    std::vector<Element> got;
    for (auto act : read_slice(m, p, s, false, got)) co_yield act;
    for (const auto& e : got) {
      if (row && *row != e.i) {
        if (first && a > 0 && before == *row)
          for (auto act : write_slot(m, p, slots, *row, false, acc.take())) co_yield act;
        else
          for (auto act : write_results(m, p, writer, acc.take())) co_yield act;
        first = false;
      }
      row = e.i;
      acc.fold(e, e.i);
    }
  }
  const bool continues = b < layout->n && after == *row;
  if (first && a > 0 && before == *row) {
    for (auto act : write_slot(m, p, slots, *row, continues, acc.take())) co_yield act;
  } else if (continues) {
    state->open_row = *row;
    state->owns_open_row = true;
  } else {
    for (auto act : write_results(m, p, writer, acc.take())) co_yield act;
  }
}

// The owner of a row crossing span ends folds in the slots of later spans.
Program owner_program(Machine& m, ProcId p, const SpanLayout* layout, const SlotPlan* slots,
                      CombineState* state) {
  if (!state->writer) co_return;
  auto& writer = *state->writer;
  if (state->owns_open_row) {
    const auto B = m.config().block;
    auto& acc = *state->acc;
    for (auto q = p + 1; q < layout->P; ++q) {
      if (layout->bound(q) == layout->bound(q + 1)) continue;
      co_yield Input{slots->slot(q), false};
      const auto head = m.last_input(p);
      std::vector<Element> got(head.begin(), head.end());
      const auto marker = got.front();
      const auto count = static_cast<std::size_t>(marker.j);
      m.discard(p, std::vector<std::uint64_t>{marker.id});
      for (std::size_t x = 1; x < got.size(); ++x) acc.fold(got[x], state->open_row);
      for (std::size_t k = 1; k < ceil_div(count + 1, B); ++k) {
        co_yield Input{BlockAddr{slots->slot(q).index + k}, false};
        const auto more = m.last_input(p);
        const std::vector<Element> rest(more.begin(), more.end());
        for (const auto& e : rest) acc.fold(e, state->open_row);
      }
      if (marker.value == 0) break;
    }
    for (auto act : write_results(m, p, writer, acc.take())) co_yield act;
  }
  for (auto act : writer.flush()) co_yield act;
}

}  // namespace

ReduceResult finalize_parallel_reduce(Machine& machine, const MetaRunSet& meta,
                                      std::int64_t N_R, std::int32_t w, const ReduceOp& op) {
  const auto P = machine.processors();
  const auto B = machine.config().block;
  const auto width = static_cast<std::size_t>(std::max(1, w));
  if (width + 2 * B > machine.config().memory)
    throw PemError(ErrorKind::Precondition, "w + 2B must fit in internal memory");

  // Partial reduction of every tile.
  SpanLayout input;
  input.P = P;
  input.run_start.push_back(0);
  for (const auto& r : meta.runs) {
    input.region.append(r);
    input.run_start.push_back(input.run_start.back() + r.size());
  }
  input.region.bookkeeping.clear();
  input.n = input.region.size();
  std::vector<std::vector<std::pair<std::size_t, Run>>> pieces(P);
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) progs.push_back(partial_program(machine, p, &input, &op, &pieces[p]));
    run_programs(machine, progs);
  }
  std::vector<Run> partial_runs(meta.runs.size());
  for (auto& list : pieces)
    for (auto& [r, piece] : list) partial_runs[r].append(piece);
  std::erase_if(partial_runs, [](const Run& r) { return r.empty(); });

  SpanLayout rows;
  rows.P = P;
  if (partial_runs.size() > 1) {
    rows.region = transpose_tiles(machine, partial_runs, N_R);
  } else if (!partial_runs.empty()) {
    rows.region = partial_runs[0];
  }
  rows.n = rows.region.size();

  SlotPlan slots;
  slots.blocks_per_slot = ceil_div(width + 1, B);
  slots.base = machine.allocate(P * slots.blocks_per_slot);
  std::vector<CombineState> state(P);
  {
    std::vector<Program> progs;
    for (ProcId p = 0; p < P; ++p) progs.push_back(combine_program(machine, p, &rows, &op, &slots, &state[p]));
    run_programs(machine, progs);
    progs.clear();
    for (ProcId p = 0; p < P; ++p) progs.push_back(owner_program(machine, p, &rows, &slots, &state[p]));
    run_programs(machine, progs);
  }

  Run results;
  for (auto& s : state)
    if (s.writer) results.append(s.writer->run());
  ReduceResult out;
  out.region = results.empty() || is_dense(results, B) ? results : contract(machine, results);
  out.by_output.assign(width, std::vector<std::int64_t>(static_cast<std::size_t>(N_R), op.identity));
  for (const auto& e : peek_run(machine, out.region)) out.by_output.at(e.l - 1).at(e.i - 1) = e.value;
  return out;
}

}  // namespace pemsim
