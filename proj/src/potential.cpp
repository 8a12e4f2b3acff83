#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <unordered_map>

#include "pemsim/cost_model.hpp"

namespace pemsim {

namespace {

// Per-place counts of elements by output block.
using Counts = std::unordered_map<std::size_t, double>;

double rating(const Counts& counts) {
  double sum = 0;
  for (const auto& [block, x] : counts) sum += togetherness(x);
  return sum;
}

}  // namespace

double togetherness(double x) { return x > 0 ? x * std::log2(x) : 0.0; }

OutputBlockOf row_major_blocks(const ShuffleInstance& instance, std::size_t B) {
  const auto sorted = oracle_shuffle(instance);
  auto rank = std::make_shared<std::map<std::pair<std::int64_t, std::int64_t>, std::size_t>>();
  for (std::size_t x = 0; x < sorted.size(); ++x) (*rank)[{sorted[x].i, sorted[x].j}] = x / B;
  return [rank](const Element& e) -> std::optional<std::size_t> {
    if (e.kind != ElementKind::Data) return std::nullopt;
    auto it = rank->find({e.i, e.j});
    if (it == rank->end()) return std::nullopt;
    return it->second;
  };
}

double potential(const Machine& machine, const OutputBlockOf& output_block_of) {
  double phi = 0;
  auto add = [&](std::span<const Element> place) {
    Counts counts;
    for (const auto& e : place)
      if (auto b = output_block_of(e)) counts[*b] += 1;
    phi += rating(counts);
  };
  for (ProcId p = 0; p < machine.processors(); ++p) add(machine.internal(p));
  for (const auto& [addr, block] : machine.external()) add(block);
  return phi;
}

double potential_step_bound(const Params& p) {
  return p.P * p.B * std::log2(2 * std::exp(1.0)) + p.P * p.B * std::log2(std::min(p.M, p.H / p.P) / p.B);
}

PotentialMonitor::PotentialMonitor(Machine& machine, OutputBlockOf output_block_of, double step_bound)
    : machine_(machine), block_of_(std::move(output_block_of)), bound_(step_bound) {
  memories_.resize(machine_.processors());
  for (const auto& [addr, block] : machine_.external()) {
    auto& ids = blocks_[addr.index];
    for (const auto& e : block)
      if (auto b = block_of_(e)) {
        auto& t = tracked_[e.id];
        t.out = *b;
        t.written.emplace_back(0, addr.index);
        ids.push_back(e.id);
      }
  }
  sync_memories();
  for (const auto& [id, t] : tracked_) relocate(id);
  initial_ = last_after_ = phi_;
  machine_.set_observer([this](const Machine& m, StepPhase phase) { observe(m, phase); });
}

PotentialMonitor::~PotentialMonitor() { machine_.set_observer({}); }

double PotentialMonitor::current() const {
  sync_memories();
  return phi_;
}

void PotentialMonitor::move(std::uint64_t id, std::optional<Place> to) const {
  auto& t = tracked_.at(id);
  if (t.at == to) return;
  auto shift = [&](const Place& place, double by) {
    auto& c = counts_[place][t.out];
    phi_ += togetherness(c + by) - togetherness(c);
    c += by;
  };
  if (t.at) shift(*t.at, -1);
  if (to) shift(*to, 1);
  t.at = to;
}

// A memory holding the element wins; otherwise the most recently written
// block that still holds it.
void PotentialMonitor::relocate(std::uint64_t id) const {
  auto& t = tracked_.at(id);
  bool copy = false;
  std::optional<Place> to;
  if (const auto h = holders_.find(id); h != holders_.end() && h->second > 0) {
    copy = h->second > 1;
    for (ProcId p = 0; p < memories_.size() && !to; ++p)
      if (std::find(memories_[p].begin(), memories_[p].end(), id) != memories_[p].end()) to = Place{true, p};
  } else {
    std::optional<std::size_t> newest;
    for (auto it = t.written.rbegin(); it != t.written.rend();) {
      const auto b = blocks_.find(it->second);
      const bool holds = b != blocks_.end() && std::find(b->second.begin(), b->second.end(), id) != b->second.end();
      if (!holds) {
        it = decltype(it)(t.written.erase(std::next(it).base()));
        continue;
      }
      if (!newest) {
        newest = it->first;
        to = Place{false, it->second};
      } else if (it->first == *newest && it->second != to->key) {
        copy = true;
      } else {
        break;
      }
      ++it;
    }
  }
  if (copy) copies_.insert(id); else copies_.erase(id);
  move(id, to);
}

void PotentialMonitor::sync_memories() const {
  std::vector<std::uint64_t> dirty;
  for (ProcId p = 0; p < machine_.processors(); ++p) {
    std::vector<std::uint64_t> now;
    for (const auto& e : machine_.internal(p))
      if (auto b = block_of_(e)) {
        tracked_[e.id].out = *b;
        now.push_back(e.id);
      }
    std::sort(now.begin(), now.end());
    auto& before = memories_[p];
    std::vector<std::uint64_t> left, joined;
    std::set_difference(before.begin(), before.end(), now.begin(), now.end(), std::back_inserter(left));
    std::set_difference(now.begin(), now.end(), before.begin(), before.end(), std::back_inserter(joined));
    for (auto id : left) --holders_[id];
    for (auto id : joined) ++holders_[id];
    dirty.insert(dirty.end(), left.begin(), left.end());
    dirty.insert(dirty.end(), joined.begin(), joined.end());
    before = std::move(now);
  }
  for (auto id : dirty) relocate(id);
}

void PotentialMonitor::observe(const Machine& m, StepPhase phase) {
  if (phase == StepPhase::Before) {
    sync_memories();
    before_ = phi_;
    gaps_ += before_ - last_after_;
    return;
  }
  ++step_;
  std::vector<std::uint64_t> dirty;
  for (const auto& r : m.trace().steps.back()) {
    if (r.kind == ActionKind::Idle) continue;
    auto& ids = blocks_[r.address];
    dirty.insert(dirty.end(), ids.begin(), ids.end());
    if (r.kind == ActionKind::Input && !m.contains(BlockAddr{r.address})) {
      blocks_.erase(r.address);
      continue;
    }
    if (r.kind == ActionKind::Output) {
      ids.clear();
      for (const auto& e : m.peek(BlockAddr{r.address}))
        if (auto b = block_of_(e)) {
          auto& t = tracked_[e.id];
          t.out = *b;
          t.written.emplace_back(step_, r.address);
          ids.push_back(e.id);
          dirty.push_back(e.id);
        }
    }
  }
  sync_memories();
  for (auto id : dirty) relocate(id);
  PotentialStep s;
  s.delta = phi_ - before_;
  s.copy = !copies_.empty();
  s.margin = bound_ - s.delta;
  steps_.push_back(s);
  last_after_ = phi_;
}

std::optional<std::size_t> PotentialMonitor::first_violation() const {
  for (std::size_t t = 0; t < steps_.size(); ++t)
    if (!steps_[t].copy && steps_[t].margin < -1e-9) return t;
  return std::nullopt;
}

std::size_t PotentialMonitor::copy_steps() const {
  return static_cast<std::size_t>(std::count_if(steps_.begin(), steps_.end(), [](const auto& s) { return s.copy; }));
}

}  // namespace pemsim
