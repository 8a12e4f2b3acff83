#include "pemsim/program.hpp"

namespace pemsim {

std::size_t run_programs(Machine& machine, std::vector<Program>& programs) {
  const auto P = machine.processors();
  if (programs.size() > P)
    throw PemError(ErrorKind::Precondition, "more programs than processors");
  programs.resize(P);
  const auto before = machine.parallel_io_count();
  std::vector<bool> live(P);
  for (ProcId p = 0; p < P; ++p) live[p] = programs[p].valid();

  std::vector<StepAction> actions(P);
  while (true) {
    bool any = false;
    for (ProcId p = 0; p < P; ++p) {
      actions[p] = Idle{};
      if (!live[p]) continue;
      if (programs[p].advance()) {
        actions[p] = programs[p].action();
        if (!std::holds_alternative<Idle>(actions[p])) any = true;
      } else {
        live[p] = false;
      }
    }
    if (!any) {
      // Nobody acts: the step is not issued at all.
      bool waiting = false;
      for (ProcId p = 0; p < P; ++p) waiting = waiting || live[p];
      if (!waiting) break;
      continue;
    }
    machine.parallel_step(actions);
  }
  return machine.parallel_io_count() - before;
}

}  // namespace pemsim
