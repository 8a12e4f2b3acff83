#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pemsim/cost_model.hpp"
#include "pemsim/harness.hpp"

using namespace pemsim;

namespace {

struct SweepOptions {
  std::string grid, out, policy, algorithms;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 0;
  bool no_potential = false;
};

void add_sweep_options(CLI::App* cmd, SweepOptions& o) {
  cmd->add_option("--grid", o.grid, "grid file (key = value, lists as [a, b])")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seeds, "seeds, overriding the grid file");
  cmd->add_option("--out", o.out, "report path, - for stdout");
  cmd->add_option("--algorithms", o.algorithms, "comma-separated algorithm names");
  cmd->add_option("--policy", o.policy, "crew or erew")->check(CLI::IsMember({"crew", "erew"}));
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_flag("--no-potential", o.no_potential, "skip potential monitoring");
}

ExperimentSpec load_spec(const SweepOptions& o) {
  std::ifstream in(o.grid);
  auto spec = parse_spec(in);
  if (!o.seeds.empty()) spec.seeds = o.seeds;
  if (!o.out.empty()) spec.output_path = o.out;
  if (!o.policy.empty()) spec.policy = o.policy == "erew" ? AccessPolicy::EREW : AccessPolicy::CREW;
  if (o.threads) spec.threads = o.threads;
  if (o.no_potential) spec.potential = false;
  if (!o.algorithms.empty()) {
    spec.algorithms.clear();
    std::stringstream ss(o.algorithms);
    for (std::string name; std::getline(ss, name, ',');) spec.algorithms.push_back(name);
  }
  return spec;
}

void emit(const std::string& path, const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
}

int summarize(const Report& report, const std::vector<const ReportRow*>& over_budget) {
  std::size_t ok = 0, skipped = 0, failed = 0, wrong = 0, potential = 0;
  for (const auto& r : report.rows) {
    ok += r.status == RowStatus::Ok;
    skipped += r.status == RowStatus::Skipped;
    failed += r.status == RowStatus::Failed;
    wrong += r.correct == Verdict::Fail;
    potential += r.potential == Verdict::Fail;
  }
  std::cerr << "rows " << report.rows.size() << ": ok " << ok << ", skipped " << skipped << ", failed " << failed
            << ", incorrect " << wrong << ", potential failures " << potential << ", over budget "
            << over_budget.size() << '\n';
  for (const auto* r : over_budget)
    std::cerr << "  over budget: " << r->algorithm << " H=" << r->H << " P=" << r->P << " measured "
              << r->measured << '\n';
  return report.passed() && over_budget.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PEM shuffle simulator experiments"};
  app.require_subcommand(1);

  SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "run every algorithm on every grid point");
  add_sweep_options(sweep, sweep_opts);

  std::string report_path, constants_out;
  std::size_t min_rows = 10;
  auto* cal = app.add_subcommand("calibrate", "fit C1, C2 per algorithm from a report");
  cal->add_option("--report", report_path, "sweep report")->required()->check(CLI::ExistingFile);
  cal->add_option("--out", constants_out, "constants path, - for stdout");
  cal->add_option("--min-rows", min_rows, "rows required per algorithm");

  SweepOptions verify_opts;
  std::string constants_in;
  auto* verify = app.add_subcommand("verify", "sweep and check verdicts and calibrated budgets");
  add_sweep_options(verify, verify_opts);
  verify->add_option("--constants", constants_in, "frozen constants file")->check(CLI::ExistingFile);

  std::string bounds_grid, bounds_out;
  double eps = 0.5;
  auto* bounds = app.add_subcommand("bounds", "print the formula catalog for grid points");
  bounds->add_option("--grid", bounds_grid, "grid file")->required()->check(CLI::ExistingFile);
  bounds->add_option("--out", bounds_out, "catalog path, - for stdout");
  bounds->add_option("--eps", eps, "exponent for the lower-bound regions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      const auto spec = load_spec(sweep_opts);
      const auto report = run_sweep(spec);
      emit(spec.output_path, [&](std::ostream& os) { write_report(os, report); });
      return summarize(report, {});
    }
    if (*cal) {
      std::ifstream in(report_path);
      const auto constants = calibrate(read_report(in), min_rows);
      emit(constants_out, [&](std::ostream& os) { write_constants(os, constants); });
      return 0;
    }
    if (*verify) {
      const auto spec = load_spec(verify_opts);
      const auto report = run_sweep(spec);
      if (!spec.output_path.empty()) emit(spec.output_path, [&](std::ostream& os) { write_report(os, report); });
      std::vector<const ReportRow*> over;
      if (!constants_in.empty()) {
        std::ifstream in(constants_in);
        over = budget_violations(report, read_constants(in));
      }
      return summarize(report, over);
    }
    if (*bounds) {
      std::ifstream in(bounds_grid);
      const auto spec = parse_spec(in);
      std::vector<Params> points;
      for (auto N_M : spec.N_M)
        for (auto N_R : spec.N_R)
          for (auto H : spec.H)
            for (auto v : spec.v)
              for (auto w : spec.w)
                for (auto P : spec.P)
                  for (auto M : spec.M)
                    for (auto B : spec.B) {
                      Params p;
                      p.N_M = static_cast<double>(N_M);
                      p.N_R = static_cast<double>(N_R);
                      p.H = static_cast<double>(H);
                      p.v = static_cast<double>(v);
                      p.w = static_cast<double>(w);
                      p.P = static_cast<double>(P);
                      p.M = static_cast<double>(M);
                      p.B = static_cast<double>(B);
                      p.eps = eps;
                      points.push_back(p);
                    }
      emit(bounds_out, [&](std::ostream& os) { write_catalog(os, points); });
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
