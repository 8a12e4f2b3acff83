#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "pemsim/harness.hpp"

namespace pemsim {

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void parse_error(const std::string& what) { throw PemError(ErrorKind::Parse, what); }

template <class T>
T number(const std::string& text) {
  const auto s = trim(text);
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || end != s.data() + s.size()) parse_error("not a number: '" + s + "'");
  return value;
}

std::vector<std::string> list_items(const std::string& value) {
  auto v = trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  for (auto& item : split(v, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

template <class T>
std::vector<T> numbers(const std::string& value) {
  std::vector<T> out;
  for (const auto& item : list_items(value)) out.push_back(number<T>(item));
  return out;
}

std::string format(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::NotApplicable: return "na";
  }
  return "na";
}

Verdict verdict_of(const std::string& s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "fail") return Verdict::Fail;
  if (s == "na") return Verdict::NotApplicable;
  parse_error("bad verdict " + s);
}

const char* status_name(RowStatus s) {
  switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::Skipped: return "skipped";
    case RowStatus::Failed: return "failed";
  }
  return "ok";
}

RowStatus status_of(const std::string& s) {
  if (s == "ok") return RowStatus::Ok;
  if (s == "skipped") return RowStatus::Skipped;
  if (s == "failed") return RowStatus::Failed;
  parse_error("bad status " + s);
}

constexpr const char* kHeader =
    "algorithm,N_M,N_R,H,v,w,P,M,B,seed,status,reason,measured,leading,lower,correct,potential,copy_steps,min_margin";

}  // namespace

ExperimentSpec parse_spec(std::istream& is) {
  ExperimentSpec spec;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_error("line " + std::to_string(n) + ": expected key = value");
    const auto key = trim(line.substr(0, eq)), value = line.substr(eq + 1);
    if (key == "N_M") spec.N_M = numbers<std::int64_t>(value);
    else if (key == "N_R") spec.N_R = numbers<std::int64_t>(value);
    else if (key == "H") spec.H = numbers<std::int64_t>(value);
    else if (key == "v") spec.v = numbers<std::int64_t>(value);
    else if (key == "w") spec.w = numbers<std::int64_t>(value);
    else if (key == "P") spec.P = numbers<std::size_t>(value);
    else if (key == "M") spec.M = numbers<std::size_t>(value);
    else if (key == "B") spec.B = numbers<std::size_t>(value);
    else if (key == "seeds" || key == "seed") spec.seeds = numbers<std::uint64_t>(value);
    else if (key == "algorithms") spec.algorithms = list_items(value);
    else if (key == "threads") spec.threads = number<std::size_t>(value);
    else if (key == "potential") spec.potential = trim(value) == "true" || trim(value) == "1";
    else if (key == "output" || key == "output_path") spec.output_path = trim(value);
    else if (key == "policy") {
      const auto p = trim(value);
      if (p == "crew") spec.policy = AccessPolicy::CREW;
      else if (p == "erew") spec.policy = AccessPolicy::EREW;
      else parse_error("unknown policy " + p);
    } else {
      parse_error("line " + std::to_string(n) + ": unknown key " + key);
    }
  }
  if (spec.algorithms.empty()) spec.algorithms = algorithm_names();
  return spec;
}

void write_report(std::ostream& os, const Report& report) {
  os << kHeader << '\n';
  for (const auto& r : report.rows) {
    auto reason = r.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    os << r.algorithm << ',' << r.N_M << ',' << r.N_R << ',' << r.H << ',' << r.v << ',' << r.w << ','
       << r.P << ',' << r.M << ',' << r.B << ',' << r.seed << ',' << status_name(r.status) << ',' << reason
       << ',' << r.measured << ',' << format(r.leading) << ',' << (r.lower ? format(*r.lower) : "") << ','
       << verdict_name(r.correct) << ',' << verdict_name(r.potential) << ',' << r.copy_steps << ','
       << format(r.min_margin) << '\n';
  }
}

Report read_report(std::istream& is) {
  Report report;
  std::string line;
  if (!std::getline(is, line) || trim(line) != kHeader) parse_error("missing report header");
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 19) parse_error("expected 19 fields: " + line);
    ReportRow r;
    r.algorithm = f[0];
    r.N_M = number<std::int64_t>(f[1]);
    r.N_R = number<std::int64_t>(f[2]);
    r.H = number<std::int64_t>(f[3]);
    r.v = number<std::int64_t>(f[4]);
    r.w = number<std::int64_t>(f[5]);
    r.P = number<std::size_t>(f[6]);
    r.M = number<std::size_t>(f[7]);
    r.B = number<std::size_t>(f[8]);
    r.seed = number<std::uint64_t>(f[9]);
    r.status = status_of(f[10]);
    r.reason = f[11];
    r.measured = number<std::size_t>(f[12]);
    r.leading = number<double>(f[13]);
    if (!trim(f[14]).empty()) r.lower = number<double>(f[14]);
    r.correct = verdict_of(f[15]);
    r.potential = verdict_of(f[16]);
    r.copy_steps = number<std::size_t>(f[17]);
    r.min_margin = number<double>(f[18]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace pemsim
