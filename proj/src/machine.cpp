#include "pemsim/machine.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

namespace pemsim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::ExclusiveWrite: return "exclusive-write";
    case ErrorKind::Policy: return "policy";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Provenance: return "provenance";
    case ErrorKind::MissingBlock: return "missing-block";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

const char* to_string(AccessPolicy policy) {
  return policy == AccessPolicy::CREW ? "crew" : "erew";
}

void MachineConfig::validate() const {
  if (processors < 1) throw PemError(ErrorKind::Configuration, "P must be at least 1");
  if (block < 1) throw PemError(ErrorKind::Configuration, "B must be at least 1");
  if (memory < 3 * block) {
    std::ostringstream os;
    os << "M = " << memory << " is below 3B = " << 3 * block;
    throw PemError(ErrorKind::Configuration, os.str());
  }
}

Output output_of(BlockAddr addr, std::span<const Element> elements) {
  Output out{addr, {}};
  out.ids.reserve(elements.size());
  for (const auto& e : elements) out.ids.push_back(e.id);
  return out;
}

void IOTrace::write_csv(std::ostream& os) const {
  os << "step,processor,action,address,elements_moved\n";
  for (std::size_t s = 0; s < steps.size(); ++s) {
    for (std::size_t p = 0; p < steps[s].size(); ++p) {
      const auto& r = steps[s][p];
      os << s << ',' << p << ',';
      switch (r.kind) {
        case ActionKind::Idle: os << "idle,,0\n"; continue;
        case ActionKind::Input: os << "input,"; break;
        case ActionKind::Output: os << "output,"; break;
      }
      os << r.address << ',' << r.elements << '\n';
    }
  }
}

Machine::Machine(MachineConfig config, std::vector<InitialBlock> initial)
    : config_(config) {
  config_.validate();
  const auto P = config_.processors;
  memory_.resize(P);
  last_input_.resize(P);
  trace_.inputs.assign(P, 0);
  trace_.outputs.assign(P, 0);
  next_addr_ = P;
  for (auto& [addr, elements] : initial) {
    if (elements.size() > config_.block) {
      std::ostringstream os;
      os << "initial block " << addr.index << " holds " << elements.size()
         << " elements, B = " << config_.block;
      throw PemError(ErrorKind::Configuration, os.str());
    }
    for (const auto& e : elements) next_id_ = std::max(next_id_, e.id + 1);
    next_addr_ = std::max(next_addr_, addr.index + 1);
    external_[addr] = std::move(elements);
  }
}

void Machine::check_proc(ProcId p) const {
  if (p >= config_.processors)
    throw PemError(ErrorKind::Precondition, "processor index out of range");
}

const std::vector<Element>& Machine::peek(BlockAddr addr) const {
  auto it = external_.find(addr);
  if (it == external_.end())
    throw PemError(ErrorKind::MissingBlock,
                   "no block at address " + std::to_string(addr.index));
  return it->second;
}

BlockAddr Machine::inbox(ProcId p) const {
  check_proc(p);
  return BlockAddr{p};
}

BlockAddr Machine::allocate(std::size_t count) {
  BlockAddr first{next_addr_};
  next_addr_ += std::max<std::size_t>(count, 1);
  return first;
}

namespace {

// Removes one occurrence of each id; returns false (memory untouched) if any
// id is absent.
bool take_ids(std::vector<Element>& memory, std::span<const std::uint64_t> ids,
              std::vector<Element>* taken) {
  std::vector<bool> used(memory.size(), false);
  std::vector<std::size_t> picks;
  picks.reserve(ids.size());
  for (auto id : ids) {
    bool found = false;
    for (std::size_t x = 0; x < memory.size(); ++x) {
      if (!used[x] && memory[x].id == id) {
        used[x] = true;
        picks.push_back(x);
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  if (taken) {
    taken->clear();
    for (auto x : picks) taken->push_back(memory[x]);
  }
  std::vector<Element> rest;
  rest.reserve(memory.size() - picks.size());
  for (std::size_t x = 0; x < memory.size(); ++x)
    if (!used[x]) rest.push_back(memory[x]);
  memory = std::move(rest);
  return true;
}

bool holds_all(const std::vector<Element>& memory, std::span<const std::uint64_t> ids) {
  std::multiset<std::uint64_t> have;
  for (const auto& e : memory) have.insert(e.id);
  for (auto id : ids) {
    auto it = have.find(id);
    if (it == have.end()) return false;
    have.erase(it);
  }
  return true;
}

}  // namespace

void Machine::parallel_step(std::span<const StepAction> actions) {
  const auto P = config_.processors;
  const auto B = config_.block;
  const auto M = config_.memory;
  if (actions.size() != P)
    throw PemError(ErrorKind::Precondition, "one action per processor is required");

  bool any = false;
  std::set<BlockAddr> written;
  std::multiset<BlockAddr> read;
  for (ProcId p = 0; p < P; ++p) {
    if (const auto* in = std::get_if<Input>(&actions[p])) {
      any = true;
      if (!external_.contains(in->addr))
        throw PemError(ErrorKind::MissingBlock, "processor " + std::to_string(p) +
                                                    " reads empty address " +
                                                    std::to_string(in->addr.index));
      const auto after = memory_[p].size() + external_.at(in->addr).size();
      if (after > M)
        throw PemError(ErrorKind::Capacity, "processor " + std::to_string(p) +
                                                " would hold " + std::to_string(after) +
                                                " elements, M = " + std::to_string(M));
      read.insert(in->addr);
    } else if (const auto* out = std::get_if<Output>(&actions[p])) {
      any = true;
      if (out->ids.size() > B)
        throw PemError(ErrorKind::Overflow, "output of more than B elements");
      if (!written.insert(out->addr).second)
        throw PemError(ErrorKind::ExclusiveWrite,
                       "two outputs to address " + std::to_string(out->addr.index));
      if (!holds_all(memory_[p], out->ids))
        throw PemError(ErrorKind::Provenance, "processor " + std::to_string(p) +
                                                  " outputs elements it does not hold");
    }
  }
  if (!any) throw PemError(ErrorKind::Precondition, "all-idle parallel step");
  if (config_.policy == AccessPolicy::EREW) {
    for (auto it = read.begin(); it != read.end(); it = read.upper_bound(*it)) {
      if (read.count(*it) > 1 || written.contains(*it))
        throw PemError(ErrorKind::Policy,
                       "EREW forbids concurrent access to address " +
                           std::to_string(it->index));
    }
  }

  if (observer_) observer_(*this, StepPhase::Before);

  std::vector<ActionRecord> record(P);
  std::vector<std::vector<Element>> delivered(P);
  for (ProcId p = 0; p < P; ++p) {
    if (const auto* in = std::get_if<Input>(&actions[p])) {
      delivered[p] = external_.at(in->addr);
      record[p] = {ActionKind::Input, in->addr.index,
                   static_cast<std::uint32_t>(delivered[p].size())};
    }
  }
  for (ProcId p = 0; p < P; ++p)
    if (const auto* in = std::get_if<Input>(&actions[p]); in && in->consume)
      external_.erase(in->addr);
  for (ProcId p = 0; p < P; ++p) {
    if (const auto* out = std::get_if<Output>(&actions[p])) {
      std::vector<Element> block;
      take_ids(memory_[p], out->ids, &block);
      record[p] = {ActionKind::Output, out->addr.index,
                   static_cast<std::uint32_t>(block.size())};
      external_[out->addr] = std::move(block);
      ++trace_.outputs[p];
    }
  }
  for (ProcId p = 0; p < P; ++p) {
    last_input_[p].clear();
    if (record[p].kind == ActionKind::Input) {
      memory_[p].insert(memory_[p].end(), delivered[p].begin(), delivered[p].end());
      last_input_[p] = std::move(delivered[p]);
      ++trace_.inputs[p];
    }
  }
  trace_.steps.push_back(std::move(record));
  ++trace_.parallel_io_count;

  if (observer_) observer_(*this, StepPhase::After);
}

void Machine::discard(ProcId p, std::span<const std::uint64_t> ids) {
  check_proc(p);
  if (ids.empty()) return;
  if (!take_ids(memory_[p], ids, nullptr))
    throw PemError(ErrorKind::Provenance, "processor " + std::to_string(p) +
                                              " discards elements it does not hold");
}

void Machine::discard_all(ProcId p) {
  check_proc(p);
  memory_[p].clear();
}

void Machine::compute(
    ProcId p, const std::function<std::vector<Element>(std::vector<Element>)>& transform) {
  check_proc(p);
  auto result = transform(memory_[p]);
  if (result.size() > config_.memory)
    throw PemError(ErrorKind::Capacity, "compute result exceeds M on processor " +
                                            std::to_string(p));
  memory_[p] = std::move(result);
}

double bsp_star_cost(const IOTrace& trace, double g, double latency) {
  return static_cast<double>(trace.parallel_io_count) * (g + latency);
}

std::size_t replay_bsp_star(Machine& machine, std::span<const BspSuperstep> supersteps) {
  const auto P = machine.processors();
  const auto before = machine.parallel_io_count();
  for (const auto& step : supersteps) {
    std::vector<int> sends(P, 0), receives(P, 0);
    for (const auto& msg : step) {
      if (msg.from >= P || msg.to >= P)
        throw PemError(ErrorKind::Precondition, "message endpoint out of range");
      if (++sends[msg.from] > 1 || ++receives[msg.to] > 1)
        throw PemError(ErrorKind::Precondition, "super-step is not a 1-relation");
    }
    if (step.empty()) continue;
    std::vector<StepAction> out(P, Idle{}), in(P, Idle{});
    for (const auto& msg : step) {
      auto mailbox = machine.allocate();
      out[msg.from] = Output{mailbox, msg.ids};
      in[msg.to] = Input{mailbox, true};
    }
    machine.parallel_step(out);
    machine.parallel_step(in);
  }
  return machine.parallel_io_count() - before;
}

}  // namespace pemsim
