#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "pemsim/cost_model.hpp"
#include "pemsim/harness.hpp"
#include "pemsim/shuffle.hpp"

namespace pemsim {

namespace {

enum class Family { Direct, Complete, Unordered, Sorted, ParallelMap };

struct Algorithm {
  std::string name;
  Family family;
  bool parallel_reduce = false;
};

const std::vector<Algorithm>& algorithms() {
  static const std::vector<Algorithm> all{
      {"direct_shuffle", Family::Direct},
      {"complete_sort", Family::Complete},
      {"unordered_nonparallel", Family::Unordered},
      {"sorted_nonparallel", Family::Sorted},
      {"parallel_map_nonparallel", Family::ParallelMap},
      {"unordered_parallel", Family::Unordered, true},
      {"sorted_parallel", Family::Sorted, true},
      {"parallel_map_parallel", Family::ParallelMap, true},
  };
  return all;
}

const Algorithm& find_algorithm(const std::string& name) {
  for (const auto& a : algorithms())
    if (a.name == name) return a;
  throw PemError(ErrorKind::Parse, "unknown algorithm " + name);
}

std::vector<std::vector<std::int64_t>> map_input(std::int64_t v, std::int64_t N_M) {
  std::vector<std::vector<std::int64_t>> input(v, std::vector<std::int64_t>(N_M));
  for (std::int64_t k = 0; k < v; ++k)
    for (std::int64_t j = 0; j < N_M; ++j) input[k][j] = 1 + (3 * k + 5 * j) % 7;
  return input;
}

std::string skip_reason(const Algorithm& a, const ReportRow& r) {
  if (r.M < 3 * r.B) return "M < 3B";
  if (r.H < static_cast<std::int64_t>(r.P * r.B)) return "H/P < B";
  if (r.H > r.N_M * r.N_R) return "H > N_M N_R";
  if (r.v > r.H / r.N_M) return "v > H/N_M";
  if (r.w > r.H / r.N_R) return "w > H/N_R";
  if (a.parallel_reduce && static_cast<std::size_t>(r.w) + 2 * r.B > r.M) return "w + 2B > M";
  if (a.family == Family::ParallelMap &&
      meta_column_budget(r.M, r.B, static_cast<std::size_t>(r.H), r.P) < static_cast<std::size_t>(r.v))
    return "meta-column budget below v";
  return {};
}

double leading_term(const Algorithm& a, const Params& p) {
  const auto reduce = a.parallel_reduce ? ReduceType::Parallel : ReduceType::NonParallel;
  switch (a.family) {
    case Family::Direct: return direct_shuffle_upper(p).value;
    case Family::Complete: return complete_merge_upper(p).value;
    case Family::Unordered: return table1_upper(p, MapType::Unordered, reduce).value;
    case Family::Sorted: return table1_upper(p, MapType::Sorted, reduce).value;
    case Family::ParallelMap: return table1_upper(p, MapType::ParallelMap, reduce).value;
  }
  return 0;
}

std::optional<double> matching_lower(const Algorithm& a, const Params& p) {
  CostEstimate e;
  switch (a.family) {
    case Family::Direct: return std::nullopt;
    case Family::Complete: e = transpose_lower(p); break;
    case Family::Unordered:
      e = a.parallel_reduce ? thm1_lower(p, LowerLayout::MixedColumn) : combined_lower(p, LowerLayout::MixedColumn);
      break;
    case Family::Sorted:
      e = a.parallel_reduce ? thm1_lower(p, LowerLayout::ColumnMajor) : combined_lower(p, LowerLayout::ColumnMajor);
      break;
    case Family::ParallelMap:
      e = a.parallel_reduce ? thm1_lower(p, LowerLayout::BestCase) : lemma2_lower(p);
      break;
  }
  if (!e.valid) return std::nullopt;
  return e.value;
}

bool same_triples(const Machine& m, const Run& run, const std::vector<Triple>& expected) {
  const auto got = peek_run(m, run);
  if (got.size() != expected.size()) return false;
  for (std::size_t x = 0; x < got.size(); ++x)
    if (!(to_triple(got[x]) == expected[x])) return false;
  return true;
}

// Row-major output blocks hold B elements except possibly the last.
double target_potential(std::size_t H, std::size_t B) {
  return static_cast<double>(H / B) * togetherness(static_cast<double>(B)) +
         togetherness(static_cast<double>(H % B));
}

}  // namespace

const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& a : algorithms()) out.push_back(a.name);
    return out;
  }();
  return names;
}

ReportRow run_point(const std::string& name, std::int64_t N_M, std::int64_t N_R, std::int64_t H,
                    std::int64_t v, std::int64_t w, const MachineConfig& config, std::uint64_t seed,
                    bool monitor_potential) {
  const auto& a = find_algorithm(name);
  ReportRow row;
  row.algorithm = name;
  row.N_M = N_M;
  row.N_R = N_R;
  row.H = H;
  row.v = v;
  row.w = w;
  row.P = config.processors;
  row.M = config.memory;
  row.B = config.block;
  row.seed = seed;
  if (auto why = skip_reason(a, row); !why.empty()) {
    row.status = RowStatus::Skipped;
    row.reason = why;
    return row;
  }
  try {
    GenerateParams g;
    g.N_M = N_M;
    g.N_R = N_R;
    g.H = H;
    g.v = static_cast<std::int32_t>(v);
    g.w = static_cast<std::int32_t>(w);
    g.layout = a.family == Family::Sorted ? Layout::column() : Layout::mixed();
    g.seed = seed;
    ShuffleInstance inst;
    try {
      inst = generate(g);
    } catch (const PemError& e) {
      if (e.kind() != ErrorKind::Generation) throw;
      row.status = RowStatus::Skipped;
      row.reason = e.what();
      return row;
    }
    const auto params = Params::of(inst, config);
    row.leading = leading_term(a, params);
    row.lower = matching_lower(a, params);

    const bool map = a.family == Family::ParallelMap;
    const auto input = map ? map_input(v, N_M) : std::vector<std::vector<std::int64_t>>(v, std::vector<std::int64_t>(N_M, 1));
    auto ws = map ? make_map_workspace(config, inst, input) : make_workspace(config, inst);
    auto& machine = ws.machine;
    const auto uH = static_cast<std::size_t>(H), uN_R = static_cast<std::size_t>(N_R);
    const auto B = config.block;

    std::optional<PotentialMonitor> monitor;
    const bool transposes = !a.parallel_reduce && a.family != Family::Direct;
    if (monitor_potential && transposes) {
      const auto& target = map ? apply_map(inst, input) : inst;
      monitor.emplace(machine, row_major_blocks(target, B), potential_step_bound(params));
    }

    bool correct = false;
    if (a.family == Family::Direct) {
      correct = same_triples(machine, direct_shuffle(machine, inst, ws.input), oracle_shuffle(inst));
    } else if (a.family == Family::Complete) {
      correct = same_triples(machine, complete_sort(machine, inst, ws.input), oracle_shuffle(inst));
    } else {
      const auto R = a.parallel_reduce ? runs_for_parallel_reduce(uH, uN_R, static_cast<std::size_t>(w), B)
                                       : runs_for_sorted_reduce(uH, uN_R, B);
      MetaRunSet meta;
      if (a.family == Family::Unordered) meta = prepare_unordered_map(machine, inst, ws.input, R);
      if (a.family == Family::Sorted) meta = prepare_sorted_map(machine, inst, ws.input, R);
      if (map) meta = prepare_parallel_map(machine, inst, ws.input, meta_column_budget(config.memory, B, uH, config.processors), R);
      if (a.parallel_reduce) {
        const auto out = finalize_parallel_reduce(machine, meta, N_R, static_cast<std::int32_t>(w));
        correct = out.by_output == oracle_combined_mxv(inst, input);
      } else {
        const auto out = finalize_nonparallel_reduce(machine, meta, N_R);
        correct = same_triples(machine, out, oracle_shuffle(map ? apply_map(inst, input) : inst));
      }
    }
    row.measured = machine.parallel_io_count();
    row.correct = correct ? Verdict::Pass : Verdict::Fail;
    if (monitor) {
      double sum = 0;
      row.min_margin = std::numeric_limits<double>::infinity();
      for (const auto& s : monitor->steps()) {
        sum += s.delta;
        if (!s.copy) row.min_margin = std::min(row.min_margin, s.margin);
      }
      row.copy_steps = monitor->copy_steps();
      const auto final_phi = monitor->current();
      const auto tol = 1e-6 * std::max(1.0, final_phi);
      const bool telescopes = std::abs(monitor->initial() + sum + monitor->between_steps() - final_phi) <= tol;
      const bool reaches = std::abs(final_phi - target_potential(uH, B)) <= tol;
      row.potential = !monitor->first_violation() && telescopes && reaches ? Verdict::Pass : Verdict::Fail;
      if (!std::isfinite(row.min_margin)) row.min_margin = 0;
    }
  } catch (const PemError& e) {
    row.status = RowStatus::Failed;
    row.reason = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return row;
}

Report run_sweep(const ExperimentSpec& spec) {
  struct Job {
    std::string algorithm;
    std::int64_t N_M, N_R, H, v, w;
    MachineConfig config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& alg : spec.algorithms)
    for (auto N_M : spec.N_M)
      for (auto N_R : spec.N_R)
        for (auto H : spec.H)
          for (auto v : spec.v)
            for (auto w : spec.w)
              for (auto P : spec.P)
                for (auto M : spec.M)
                  for (auto B : spec.B)
                    for (auto seed : spec.seeds) {
                      MachineConfig c;
                      c.processors = P;
                      c.memory = M;
                      c.block = B;
                      c.policy = spec.policy;
                      jobs.push_back({alg, N_M, N_R, H, v, w, c, seed});
                    }
  for (const auto& j : jobs) find_algorithm(j.algorithm);

  Report report;
  report.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto x = next++; x < jobs.size(); x = next++) {
      const auto& j = jobs[x];
      report.rows[x] = run_point(j.algorithm, j.N_M, j.N_R, j.H, j.v, j.w, j.config, j.seed, spec.potential);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, spec.threads); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.key() < b.key(); });
  return report;
}

bool Report::passed() const {
  return std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) {
    return r.status == RowStatus::Failed || r.correct == Verdict::Fail || r.potential == Verdict::Fail;
  });
}

}  // namespace pemsim
