#include <algorithm>
#include <cmath>
#include <sstream>

#include "pemsim/harness.hpp"

namespace pemsim {

namespace {

struct Line {
  double slope, intercept;  // (measured - C2 log2 P) / leading as a function of C2
  double at(double x) const { return intercept + slope * x; }
};

constexpr double kSlack = 1e-9;

}  // namespace

std::map<std::string, Constants> calibrate(const Report& report, std::size_t min_rows) {
  std::map<std::string, std::vector<const ReportRow*>> by_alg;
  for (const auto& r : report.rows)
    if (r.status == RowStatus::Ok) by_alg[r.algorithm].push_back(&r);

  std::map<std::string, Constants> out;
  for (const auto& [alg, rows] : by_alg) {
    if (rows.size() < min_rows)
      throw PemError(ErrorKind::Precondition, alg + ": calibration needs at least " + std::to_string(min_rows) + " rows");
    double c2_min = 0;
    std::vector<Line> lines{{0, 0}};
    for (const auto* r : rows) {
      const auto m = static_cast<double>(r->measured), g = std::log2(static_cast<double>(r->P));
      if (r->leading > 0) {
        lines.push_back({-g / r->leading, m / r->leading});
      } else if (m > 0) {
        if (g == 0) throw PemError(ErrorKind::Domain, alg + ": I/Os measured where the leading term and log P vanish");
        c2_min = std::max(c2_min, m / g);
      }
    }
    auto c1_at = [&](double c2) {
      double c1 = 0;
      for (const auto& l : lines) c1 = std::max(c1, l.at(c2));
      return c1;
    };
    // C1(C2) is non-increasing, so max(C1, C2) is smallest where the two
    // meet; among equal maxima the smallest C2 wins.
    auto worst = [&](double c2) { return std::max(c1_at(c2), c2); };
    double lo = c2_min, hi = std::max(c2_min, c1_at(c2_min));
    for (int it = 0; it < 200; ++it) {
      const auto mid = (lo + hi) / 2;
      if (c1_at(mid) > mid) lo = mid; else hi = mid;
    }
    const auto target = worst(hi);
    lo = c2_min;
    double top = hi;
    for (int it = 0; it < 200; ++it) {
      const auto mid = (lo + top) / 2;
      if (c1_at(mid) <= target) top = mid; else lo = mid;
    }
    const auto best_c2 = c1_at(c2_min) <= target ? c2_min : top;
    out[alg] = Constants{c1_at(best_c2), best_c2, rows.size()};
  }
  return out;
}

void write_constants(std::ostream& os, const std::map<std::string, Constants>& constants) {
  os << "algorithm,C1,C2,rows\n";
  os.precision(17);
  for (const auto& [alg, c] : constants) os << alg << ',' << c.C1 << ',' << c.C2 << ',' << c.rows << '\n';
}

std::map<std::string, Constants> read_constants(std::istream& is) {
  std::map<std::string, Constants> out;
  std::string line;
  if (!std::getline(is, line) || line.rfind("algorithm,C1,C2", 0) != 0)
    throw PemError(ErrorKind::Parse, "missing constants header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string alg, c1, c2, rows;
    if (!std::getline(fields, alg, ',') || !std::getline(fields, c1, ',') || !std::getline(fields, c2, ','))
      throw PemError(ErrorKind::Parse, "malformed constants line: " + line);
    std::getline(fields, rows, ',');
    try {
      out[alg] = Constants{std::stod(c1), std::stod(c2), rows.empty() ? 0 : std::stoul(rows)};
    } catch (const std::exception&) {
      throw PemError(ErrorKind::Parse, "malformed constants line: " + line);
    }
  }
  return out;
}

std::vector<const ReportRow*> budget_violations(const Report& report,
                                                const std::map<std::string, Constants>& constants) {
  std::vector<const ReportRow*> out;
  for (const auto& r : report.rows) {
    if (r.status != RowStatus::Ok) continue;
    const auto it = constants.find(r.algorithm);
    if (it == constants.end()) {
      out.push_back(&r);
      continue;
    }
    const auto budget = it->second.C1 * r.leading + it->second.C2 * std::log2(static_cast<double>(r.P));
    if (static_cast<double>(r.measured) > budget * (1 + kSlack) + kSlack) out.push_back(&r);
  }
  return out;
}

}  // namespace pemsim
