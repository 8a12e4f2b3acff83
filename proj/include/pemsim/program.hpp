#pragma once

#include <coroutine>
#include <exception>
#include <utility>
#include <vector>

#include "pemsim/machine.hpp"

namespace pemsim {

/// A processor's script: a coroutine that yields one I/O action per parallel
/// step and is resumed once that step has been applied to the machine. Free
/// computation (compute/discard) happens between yields.
///
/// Programs compose by iteration: `for (auto a : sub) co_yield a;`.
class Program {
 public:
  struct promise_type {
    StepAction current;
    std::exception_ptr error;

    Program get_return_object() {
      return Program{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    std::suspend_always yield_value(StepAction action) {
      current = std::move(action);
      return {};
    }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };
  using Handle = std::coroutine_handle<promise_type>;

  Program() = default;
  explicit Program(Handle h) : handle_(h) {}
  Program(Program&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  Program& operator=(Program&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  Program(const Program&) = delete;
  Program& operator=(const Program&) = delete;
  ~Program() { reset(); }

  bool valid() const noexcept { return static_cast<bool>(handle_); }

  /// Runs to the next action. Returns false once the program has finished.
  bool advance() {
    if (!handle_ || handle_.done()) return false;
    handle_.resume();
    if (handle_.promise().error) std::rethrow_exception(handle_.promise().error);
    return !handle_.done();
  }
  const StepAction& action() const { return handle_.promise().current; }

  struct sentinel {};
  class iterator {
   public:
    explicit iterator(Program* prog) : prog_(prog) {
      if (!prog_->advance()) prog_ = nullptr;
    }
    const StepAction& operator*() const { return prog_->action(); }
    iterator& operator++() {
      if (!prog_->advance()) prog_ = nullptr;
      return *this;
    }
    bool operator==(sentinel) const { return prog_ == nullptr; }

   private:
    Program* prog_;
  };
  iterator begin() { return iterator(this); }
  sentinel end() { return {}; }

 private:
  void reset() {
    if (handle_) handle_.destroy();
    handle_ = {};
  }
  Handle handle_;
};

/// Runs one program per processor in lock-step until all have finished.
/// Processors without a program, or whose program has ended, stay idle.
/// Returns the number of parallel I/Os performed.
std::size_t run_programs(Machine& machine, std::vector<Program>& programs);

}  // namespace pemsim
