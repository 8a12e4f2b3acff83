#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "pemsim/machine.hpp"

namespace pemsim {

/// Algorithm names accepted by the sweep.
const std::vector<std::string>& algorithm_names();

struct ExperimentSpec {
  std::vector<std::int64_t> N_M, N_R, H, v{1}, w{1};
  std::vector<std::size_t> P, M, B;
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds{1};
  AccessPolicy policy = AccessPolicy::CREW;
  bool potential = true;  // monitor the non-parallel reduce and complete sort runs
  std::size_t threads = 1;
  std::string output_path;
};

/// Line-oriented `key = value` with lists as `key = [a, b, c]`; `#` starts a
/// comment. Throws PemError(Parse) on unknown keys or malformed values.
ExperimentSpec parse_spec(std::istream& is);

enum class RowStatus { Ok, Skipped, Failed };
enum class Verdict { Pass, Fail, NotApplicable };

struct ReportRow {
  std::string algorithm;
  std::int64_t N_M = 0, N_R = 0, H = 0, v = 1, w = 1;
  std::size_t P = 1, M = 3, B = 1;
  std::uint64_t seed = 0;
  RowStatus status = RowStatus::Ok;
  std::string reason;
  std::size_t measured = 0;
  double leading = 0;
  std::optional<double> lower;
  Verdict correct = Verdict::NotApplicable;
  Verdict potential = Verdict::NotApplicable;
  std::size_t copy_steps = 0;
  double min_margin = 0;  // smallest bound margin over copy-free steps

  auto key() const { return std::tie(algorithm, N_M, N_R, H, v, w, P, M, B, seed); }
};

struct Report {
  std::vector<ReportRow> rows;
  /// No failed rows and no failed verdicts.
  bool passed() const;
};

/// Runs one algorithm on one grid point.
ReportRow run_point(const std::string& algorithm, std::int64_t N_M, std::int64_t N_R, std::int64_t H,
                    std::int64_t v, std::int64_t w, const MachineConfig& config, std::uint64_t seed,
                    bool monitor_potential = true);

/// Every (grid point, algorithm, seed), rows sorted by key.
Report run_sweep(const ExperimentSpec& spec);

void write_report(std::ostream& os, const Report& report);
/// Throws PemError(Parse) on malformed input.
Report read_report(std::istream& is);

struct Constants {
  double C1 = 0, C2 = 0;
  std::size_t rows = 0;
};

/// Per algorithm, the least max(C1, C2) with measured <= C1 leading + C2 log2 P
/// on every ok row. Throws PemError(Precondition) below `min_rows` rows and
/// PemError(Domain) when a row cannot be covered.
std::map<std::string, Constants> calibrate(const Report& report, std::size_t min_rows = 10);

void write_constants(std::ostream& os, const std::map<std::string, Constants>& constants);
std::map<std::string, Constants> read_constants(std::istream& is);

/// Rows of ok runs whose measured count exceeds the calibrated budget.
std::vector<const ReportRow*> budget_violations(const Report& report,
                                                const std::map<std::string, Constants>& constants);

}  // namespace pemsim
