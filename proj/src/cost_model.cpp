#include "pemsim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace pemsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kE = std::exp(1.0);

CostEstimate upper(std::string id, double value) { return {value, BoundKind::Upper, std::move(id), true, {}}; }
CostEstimate lower(std::string id, double value) { return {value, BoundKind::Lower, std::move(id), true, {}}; }
CostEstimate invalid(std::string id, std::string failed) {
  return {kNaN, BoundKind::Lower, std::move(id), false, std::move(failed)};
}

// min{H/P, H/(PB) log_d arg}, with the scanning floor for degenerate arguments.
double leading(const Params& p, double arg) {
  if (arg <= 1) return p.scan();
  return std::min(p.H / p.P, p.scan() * log_base(p.d(), arg));
}

double exact_base(const Params& p) { return std::max(2.0, std::min(p.M / p.B, 2 * p.H / (p.P * p.B))); }

double exact(const Params& p, double scan_factor, double first, double arg) {
  const auto log_term = std::max(0.0, log_base(exact_base(p), arg));
  return std::min(first, p.scan() / scan_factor * log_term);
}

std::string lower_precondition(const Params& p) {
  if (auto v = p.violation(); !v.empty()) return v;
  if (!p.eps_region()) return "eps_region";
  return {};
}

}  // namespace

Params Params::of(const ShuffleInstance& inst, const MachineConfig& config, double eps) {
  Params p;
  p.N_M = static_cast<double>(inst.N_M);
  p.N_R = static_cast<double>(inst.N_R);
  p.H = static_cast<double>(inst.H);
  p.v = inst.v;
  p.w = inst.w;
  p.P = static_cast<double>(config.processors);
  p.M = static_cast<double>(config.memory);
  p.B = static_cast<double>(config.block);
  p.eps = eps;
  return p;
}

double Params::d() const { return std::max(2.0, std::min(M / B, H / (P * B))); }

std::string Params::violation() const {
  if (!(N_M >= 1 && N_R >= 1 && H >= 1 && P >= 1 && B >= 1)) return "positive";
  if (v > H / N_M) return "v <= H/N_M";
  if (w > H / N_R) return "w <= H/N_R";
  if (P > H / B) return "P <= H/B";
  if (M < 3 * B) return "M >= 3B";
  if (!(eps > 0)) return "eps > 0";
  return {};
}

bool Params::eps_region() const {
  return H / N_R <= std::pow(N_M, 1 - eps) && H / N_M <= std::pow(N_R, 1 - eps);
}

double log_base(double b, double x) { return std::log(x) / std::log(b); }

double lgb(double b, double x) {
  if (!(b > 1) || !(x > 0)) throw PemError(ErrorKind::Domain, "lgb needs b > 1 and x > 0");
  return std::max(log_base(b, x), 1.0);
}

CostEstimate table1_upper(const Params& p, MapType map, ReduceType reduce) {
  const bool par = reduce == ReduceType::Parallel;
  double arg = 1;
  std::string id;
  switch (map) {
    case MapType::Unordered:
      id = "unordered";
      arg = par ? p.N_R * p.w / p.B : p.N_R;
      break;
    case MapType::Sorted:
      id = "sorted";
      arg = par ? std::min(p.N_M * p.N_R * p.w / p.H, p.N_R * p.w / p.B)
                : std::min({p.N_M * p.N_R * p.B / p.H, p.N_R, p.N_M});
      break;
    case MapType::ParallelMap:
      id = "parallel_map";
      arg = par ? p.N_M * p.N_R * p.v * p.w / (p.B * p.H) : std::min(p.N_M * p.N_R * p.v / p.H, p.N_M * p.v / p.B);
      break;
  }
  id += par ? "_x_parallel" : "_x_nonparallel";
  auto out = upper("table1_" + id, p.scan() * lgb(p.d(), arg));
  if (auto v = p.violation(); !v.empty()) {
    out.valid = false;
    out.failed = v;
  }
  return out;
}

CostEstimate direct_shuffle_upper(const Params& p) { return upper("table1_direct_shuffle", p.H / p.P); }

CostEstimate complete_merge_upper(const Params& p) {
  return upper("table1_complete_merge", p.scan() * lgb(p.d(), p.H / p.B));
}

double scatter_gather_term(const Params& p) { return std::log2(p.P); }

CostEstimate thm1_lower(const Params& p, LowerLayout layout, BoundMode mode) {
  const bool ex = mode == BoundMode::Exact;
  switch (layout) {
    case LowerLayout::MixedColumn: {
      const std::string id = ex ? "thm1_mixed_exact" : "thm1_mixed";
      if (auto f = lower_precondition(p); !f.empty()) return invalid(id, f);
      const auto arg = p.N_R * p.w / p.B;
      return lower(id, ex ? exact(p, 7, p.eps / 10 * p.H / p.P, arg / 2) : leading(p, arg));
    }
    case LowerLayout::ColumnMajor: {
      // The column-major counting carries an unsettled combinatorial factor.
      const std::string id = ex ? "thm1_column_exact_approx" : "thm1_column";
      if (auto f = lower_precondition(p); !f.empty()) return invalid(id, f);
      if (ex)
        return lower(id, exact(p, 7, p.eps * p.eps / 5 * p.H / p.P,
                               std::min(p.N_M * p.N_R * p.w / (3 * p.H), p.N_R * p.w / (kE * p.B))));
      return lower(id, leading(p, std::min(p.N_M * p.N_R * p.w / p.H, p.N_R * p.w / p.B)));
    }
    case LowerLayout::BestCase: {
      const std::string id = ex ? "thm1_best_exact" : "thm1_best";
      if (auto v = p.violation(); !v.empty()) return invalid(id, v);
      if (p.H / p.N_R > std::pow(p.N_M, 1.0 / 6) || p.H / p.N_M > std::pow(p.N_R, 1.0 / 6))
        return invalid(id, "sixth_root_region");
      const auto arg = p.N_M * p.N_R * p.v * p.w / (p.H * std::min(p.M, p.H / p.P));
      return lower(id, ex ? exact(p, 14, p.H / (20 * p.P), arg) : leading(p, arg));
    }
  }
  return invalid("thm1", "layout");
}

CostEstimate lemma2_lower(const Params& p, BoundMode mode) {
  const bool ex = mode == BoundMode::Exact;
  const std::string id = ex ? "lemma2_exact" : "lemma2";
  if (auto f = lower_precondition(p); !f.empty()) return invalid(id, f);
  if (ex)
    return lower(id, exact(p, 7, p.eps * p.eps / 5 * p.H / p.P,
                           std::min(p.N_M * p.N_R * p.v / (3 * p.H), p.N_M * p.v / (kE * p.B))));
  return lower(id, leading(p, std::min(p.N_M * p.N_R * p.v / p.H, p.N_M * p.v / p.B)));
}

CostEstimate transpose_lower(const Params& p) {
  const auto arg = std::min({p.B, p.N_M, p.N_R, p.H / p.B});
  return lower("transpose", p.scan() * std::max(0.0, log_base(p.d(), arg)));
}

CostEstimate combined_lower(const Params& p, LowerLayout layout) {
  const std::string id = layout == LowerLayout::ColumnMajor ? "combined_column" : "combined_mixed";
  if (layout == LowerLayout::BestCase) return invalid("combined_best", "no merged expression");
  if (auto f = lower_precondition(p); !f.empty()) return invalid(id, f);
  const auto arg = layout == LowerLayout::ColumnMajor
                       ? std::min({p.N_M * p.N_R * p.B / p.H, p.N_M, p.N_R, p.H / p.B})
                       : std::min(p.N_R, p.H / p.B);
  auto single = p;
  single.w = 1;
  const auto value = std::max({leading(p, arg), transpose_lower(p).value, thm1_lower(single, layout).value,
                               scatter_gather_term(p)});
  return lower(id, value);
}

void write_catalog(std::ostream& os, const std::vector<Params>& points) {
  os << "formula_id,N_M,N_R,H,v,w,P,M,B,eps,value,valid\n";
  for (const auto& p : points) {
    std::vector<CostEstimate> all;
    for (auto map : {MapType::Unordered, MapType::Sorted, MapType::ParallelMap})
      for (auto reduce : {ReduceType::NonParallel, ReduceType::Parallel}) all.push_back(table1_upper(p, map, reduce));
    all.push_back(direct_shuffle_upper(p));
    all.push_back(complete_merge_upper(p));
    for (auto layout : {LowerLayout::MixedColumn, LowerLayout::ColumnMajor, LowerLayout::BestCase})
      for (auto mode : {BoundMode::Asymptotic, BoundMode::Exact}) all.push_back(thm1_lower(p, layout, mode));
    all.push_back(lemma2_lower(p));
    all.push_back(lemma2_lower(p, BoundMode::Exact));
    all.push_back(transpose_lower(p));
    all.push_back(combined_lower(p, LowerLayout::MixedColumn));
    all.push_back(combined_lower(p, LowerLayout::ColumnMajor));
    for (const auto& e : all) {
      os << e.formula_id << ',' << p.N_M << ',' << p.N_R << ',' << p.H << ',' << p.v << ',' << p.w << ','
         << p.P << ',' << p.M << ',' << p.B << ',' << p.eps << ',';
      if (e.valid) os << e.value; else os << e.failed;
      os << ',' << (e.valid ? 1 : 0) << '\n';
    }
  }
}

}  // namespace pemsim
