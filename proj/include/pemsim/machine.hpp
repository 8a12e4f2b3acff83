#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace pemsim {

enum class ErrorKind {
  Configuration,
  ExclusiveWrite,
  Policy,
  Capacity,
  Provenance,
  MissingBlock,
  Precondition,
  Overflow,
  Generation,
  Domain,
  Parse,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the simulator and the algorithms built on it.
class PemError : public std::runtime_error {
 public:
  PemError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class AccessPolicy { CREW, EREW };

const char* to_string(AccessPolicy policy);

struct MachineConfig {
  std::size_t processors = 1;      // P
  std::size_t memory = 3;          // M, in elements
  std::size_t block = 1;           // B, in elements
  AccessPolicy policy = AccessPolicy::CREW;

  /// Throws PemError(Configuration) unless P >= 1, B >= 1 and M >= 3B.
  void validate() const;
};

using ProcId = std::size_t;

struct BlockAddr {
  std::uint64_t index = 0;
  auto operator<=>(const BlockAddr&) const = default;
};

enum class ElementKind : std::uint8_t { Data, Meta };

/// One atomic record. Data elements carry a shuffle triple; Meta elements
/// carry bookkeeping (counters, offsets, partial sums) in the same fields.
struct Element {
  std::uint64_t id = 0;  // provenance tag
  std::int64_t i = 0;    // row / intermediate key
  std::int64_t j = 0;    // column / input key
  std::int64_t value = 0;
  std::int32_t k = 0;    // origin vector
  std::int32_t l = 0;    // destination vector
  ElementKind kind = ElementKind::Data;

  bool operator==(const Element&) const = default;
};

/// Row-major sort key with the provenance id as final tie breaker.
inline auto sort_key(const Element& e) { return std::tuple(e.i, e.j, e.id); }

struct RowMajorLess {
  bool operator()(const Element& a, const Element& b) const {
    return sort_key(a) < sort_key(b);
  }
};

struct Idle {};
struct Input {
  BlockAddr addr;
  bool consume = false;  // the block vanishes from external memory after the step
};
struct Output {
  BlockAddr addr;
  std::vector<std::uint64_t> ids;  // taken out of the acting processor's memory
};
using StepAction = std::variant<Idle, Input, Output>;

Output output_of(BlockAddr addr, std::span<const Element> elements);

enum class ActionKind : std::uint8_t { Idle, Input, Output };

struct ActionRecord {
  ActionKind kind = ActionKind::Idle;
  std::uint64_t address = 0;
  std::uint32_t elements = 0;
};

struct IOTrace {
  std::vector<std::vector<ActionRecord>> steps;
  std::size_t parallel_io_count = 0;
  std::vector<std::size_t> inputs;   // per processor
  std::vector<std::size_t> outputs;  // per processor

  /// Columns: step,processor,action,address,elements_moved.
  void write_csv(std::ostream& os) const;
};

enum class StepPhase { Before, After };

class Machine;
using StepObserver = std::function<void(const Machine&, StepPhase)>;

using InitialBlock = std::pair<BlockAddr, std::vector<Element>>;

/// Deterministic PEM simulator. P private memories of M elements share an
/// external memory of B-element blocks; the only cost is the parallel I/O.
///
/// Addresses [0, P) are reserved as per-processor inboxes. Fresh addresses
/// for algorithm output come from allocate(). Reading an address that holds
/// no block is an error.
class Machine {
 public:
  explicit Machine(MachineConfig config, std::vector<InitialBlock> initial = {});

  const MachineConfig& config() const noexcept { return config_; }
  std::size_t processors() const noexcept { return config_.processors; }

  /// Executes one parallel I/O. All inputs observe the pre-step image.
  void parallel_step(std::span<const StepAction> actions);

  void discard(ProcId p, std::span<const std::uint64_t> ids);
  void discard_all(ProcId p);
  void compute(ProcId p,
               const std::function<std::vector<Element>(std::vector<Element>)>& transform);

  std::span<const Element> internal(ProcId p) const { return memory_.at(p); }
  /// Elements delivered to processor p by its input in the latest step.
  std::span<const Element> last_input(ProcId p) const { return last_input_.at(p); }

  bool contains(BlockAddr addr) const { return external_.contains(addr); }
  /// Host-side inspection; not an I/O.
  const std::vector<Element>& peek(BlockAddr addr) const;
  const std::map<BlockAddr, std::vector<Element>>& external() const { return external_; }

  BlockAddr inbox(ProcId p) const;
  /// Reserves `count` fresh consecutive addresses and returns the first.
  BlockAddr allocate(std::size_t count = 1);
  std::uint64_t fresh_id() { return next_id_++; }
  /// Reserves `count` consecutive ids and returns the first.
  std::uint64_t reserve_ids(std::uint64_t count) {
    const auto first = next_id_;
    next_id_ += count;
    return first;
  }

  const IOTrace& trace() const noexcept { return trace_; }
  std::size_t parallel_io_count() const noexcept { return trace_.parallel_io_count; }

  void set_observer(StepObserver observer) { observer_ = std::move(observer); }

 private:
  void check_proc(ProcId p) const;

  MachineConfig config_;
  std::map<BlockAddr, std::vector<Element>> external_;
  std::vector<std::vector<Element>> memory_;
  std::vector<std::vector<Element>> last_input_;
  std::uint64_t next_addr_ = 0;
  std::uint64_t next_id_ = 0;
  IOTrace trace_;
  StepObserver observer_;
};

/// Cost of a trace read as a 1-BSP* run: each parallel I/O is one
/// super-step with h = 1 and message length s = B.
double bsp_star_cost(const IOTrace& trace, double g, double latency);

/// One message of a 1-relation super-step: at most B elements from `from`
/// (taken out of its internal memory) delivered to `to`.
struct BspMessage {
  ProcId from = 0;
  ProcId to = 0;
  std::vector<std::uint64_t> ids;
};
using BspSuperstep = std::vector<BspMessage>;

/// Replays 1-BSP* super-steps on the machine: one parallel output of every
/// message into a private mailbox followed by one parallel input by each
/// receiver. Returns the number of parallel I/Os spent.
std::size_t replay_bsp_star(Machine& machine, std::span<const BspSuperstep> supersteps);

}  // namespace pemsim
