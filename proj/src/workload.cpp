#include "pemsim/workload.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace pemsim {

std::string to_string(const Layout& layout) {
  switch (layout.kind) {
    case LayoutKind::MixedColumn: return "mixed";
    case LayoutKind::ColumnMajor: return "column";
    case LayoutKind::RowMajor: return "row";
    case LayoutKind::MetaColumn: return "meta:" + std::to_string(layout.columns_per_meta);
  }
  return "?";
}

Layout parse_layout(const std::string& token) {
  if (token == "mixed") return Layout::mixed();
  if (token == "column") return Layout::column();
  if (token == "row") return Layout::row();
  if (token.rfind("meta:", 0) == 0) {
    try {
      std::size_t used = 0;
      const auto c = std::stoll(token.substr(5), &used);
      if (used == token.size() - 5 && c >= 1) return Layout::meta(c);
    } catch (const std::exception&) {
    }
  }
  throw PemError(ErrorKind::Parse, "unknown layout '" + token + "'");
}

namespace {

using Cell = std::pair<std::int64_t, std::int64_t>;  // (i, j)

[[noreturn]] void infeasible(const std::string& what) { throw PemError(ErrorKind::Generation, what); }

// h distinct values from 1..n, in random order.
std::vector<std::int64_t> sample_distinct(std::int64_t n, std::int64_t h, std::mt19937_64& rng) {
  std::vector<std::int64_t> out;
  if (h * 2 >= n) {
    out.resize(static_cast<std::size_t>(n));
    std::iota(out.begin(), out.end(), 1);
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(static_cast<std::size_t>(h));
    return out;
  }
  std::set<std::int64_t> seen;
  std::uniform_int_distribution<std::int64_t> pick(1, n);
  while (static_cast<std::int64_t>(out.size()) < h) {
    const auto x = pick(rng);
    if (seen.insert(x).second) out.push_back(x);
  }
  return out;
}

std::vector<Cell> bi_regular(std::int64_t N_M, std::int64_t N_R, std::int64_t H,
                             std::mt19937_64& rng) {
  const auto per_col = H / N_M;
  std::vector<std::int64_t> rows(N_R), cols(N_M);
  std::iota(rows.begin(), rows.end(), 1);
  std::iota(cols.begin(), cols.end(), 1);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::shuffle(cols.begin(), cols.end(), rng);
  std::vector<Cell> cells;
  std::set<Cell> present;
  for (std::int64_t j = 0; j < N_M; ++j)
    for (std::int64_t t = 0; t < per_col; ++t) {
      Cell c{rows[(j * per_col + t) % N_R], cols[j]};
      cells.push_back(c);
      present.insert(c);
    }
  // Degree-preserving switches to move away from the band structure.
  if (cells.size() >= 2) {
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    for (std::int64_t round = 0; round < 10 * H; ++round) {
      auto& a = cells[pick(rng)];
      auto& b = cells[pick(rng)];
      const Cell a2{a.first, b.second}, b2{b.first, a.second};
      if (a.first == b.first || a.second == b.second) continue;
      if (present.count(a2) || present.count(b2)) continue;
      present.erase(a);
      present.erase(b);
      a = a2;
      b = b2;
      present.insert(a);
      present.insert(b);
    }
  }
  return cells;
}

std::vector<Cell> draw_cells(const GenerateParams& g, std::mt19937_64& rng) {
  std::vector<Cell> cells;
  switch (g.regularity) {
    case Regularity::None:
      for (auto x : sample_distinct(g.N_M * g.N_R, g.H, rng))
        cells.emplace_back((x - 1) % g.N_R + 1, (x - 1) / g.N_R + 1);
      break;
    case Regularity::Column:
      for (std::int64_t j = 1; j <= g.N_M; ++j)
        for (auto i : sample_distinct(g.N_R, g.H / g.N_M, rng)) cells.emplace_back(i, j);
      break;
    case Regularity::Row:
      for (std::int64_t i = 1; i <= g.N_R; ++i)
        for (auto j : sample_distinct(g.N_M, g.H / g.N_R, rng)) cells.emplace_back(i, j);
      break;
    case Regularity::Both:
      cells = bi_regular(g.N_M, g.N_R, g.H, rng);
      break;
  }
  return cells;
}

std::int64_t meta_of(const Triple& t, const Layout& layout) {
  return (t.j - 1) / layout.columns_per_meta;
}

}  // namespace

ShuffleInstance generate(const GenerateParams& g) {
  if (g.N_M < 1 || g.N_R < 1 || g.H < 0) infeasible("dimensions must be positive");
  if (g.H > g.N_M * g.N_R) infeasible("H exceeds N_M * N_R");
  if (g.v < 1 || g.w < 1) infeasible("v and w must be at least 1");
  const bool col_reg = g.regularity == Regularity::Column || g.regularity == Regularity::Both;
  const bool row_reg = g.regularity == Regularity::Row || g.regularity == Regularity::Both;
  if (col_reg && g.H % g.N_M != 0) infeasible("column regularity needs N_M | H");
  if (row_reg && g.H % g.N_R != 0) infeasible("row regularity needs N_R | H");
  if (g.v > 1 && g.v * g.N_M > g.H) infeasible("v exceeds H / N_M");
  if (g.w > 1 && g.w * g.N_R > g.H) infeasible("w exceeds H / N_R");
  if (g.layout.kind == LayoutKind::MetaColumn && g.layout.columns_per_meta < 1)
    infeasible("meta-column width must be at least 1");

  std::mt19937_64 rng(g.seed);
  const auto cells = draw_cells(g, rng);
  std::vector<std::int64_t> values(static_cast<std::size_t>(g.H));
  std::iota(values.begin(), values.end(), 1);
  std::shuffle(values.begin(), values.end(), rng);
  std::uniform_int_distribution<std::int32_t> pick_k(1, g.v), pick_l(1, g.w);

  ShuffleInstance inst{g.N_M, g.N_R, g.H, g.v, g.w, g.layout, {}, g.seed};
  inst.triples.reserve(cells.size());
  for (std::size_t x = 0; x < cells.size(); ++x)
    inst.triples.push_back(Triple{cells[x].first, cells[x].second, values[x], pick_k(rng), pick_l(rng)});
  relayout(inst, g.layout);
  return inst;
}

void relayout(ShuffleInstance& inst, const Layout& layout) {
  auto& t = inst.triples;
  auto by_ij = [](const Triple& a, const Triple& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); };
  auto by_ji = [](const Triple& a, const Triple& b) { return std::tie(a.j, a.i) < std::tie(b.j, b.i); };
  switch (layout.kind) {
    case LayoutKind::RowMajor: std::sort(t.begin(), t.end(), by_ij); break;
    case LayoutKind::ColumnMajor: std::sort(t.begin(), t.end(), by_ji); break;
    case LayoutKind::MixedColumn: {
      std::sort(t.begin(), t.end(), by_ji);
      std::mt19937_64 rng(inst.seed ^ 0x9e3779b97f4a7c15ULL);
      for (std::size_t a = 0; a < t.size();) {
        auto b = a;
        while (b < t.size() && t[b].j == t[a].j) ++b;
        std::shuffle(t.begin() + a, t.begin() + b, rng);
        a = b;
      }
      break;
    }
    case LayoutKind::MetaColumn:
      if (layout.columns_per_meta < 1) throw PemError(ErrorKind::Domain, "meta-column width must be at least 1");
      std::sort(t.begin(), t.end(), [&](const Triple& a, const Triple& b) {
        return std::tuple(meta_of(a, layout), a.i, a.j) < std::tuple(meta_of(b, layout), b.i, b.j);
      });
      break;
  }
  inst.layout = layout;
}

std::string layout_violation(const ShuffleInstance& inst) {
  const auto& t = inst.triples;
  if (static_cast<std::int64_t>(t.size()) != inst.H) return "triple count differs from H";
  std::set<Cell> seen;
  for (std::size_t x = 0; x < t.size(); ++x) {
    const auto& e = t[x];
    if (e.i < 1 || e.i > inst.N_R || e.j < 1 || e.j > inst.N_M) return "index out of range at " + std::to_string(x);
    if (e.k < 1 || e.k > inst.v || e.l < 1 || e.l > inst.w) return "vector index out of range at " + std::to_string(x);
    if (!seen.insert({e.i, e.j}).second) return "duplicate position at " + std::to_string(x);
    if (x == 0) continue;
    const auto& p = t[x - 1];
    bool ok = true;
    switch (inst.layout.kind) {
      case LayoutKind::MixedColumn: ok = p.j <= e.j; break;
      case LayoutKind::ColumnMajor: ok = std::tie(p.j, p.i) < std::tie(e.j, e.i); break;
      case LayoutKind::RowMajor: ok = std::tie(p.i, p.j) < std::tie(e.i, e.j); break;
      case LayoutKind::MetaColumn: {
        const auto c = inst.layout.columns_per_meta;
        ok = std::tuple((p.j - 1) / c, p.i, p.j) < std::tuple((e.j - 1) / c, e.i, e.j);
        break;
      }
    }
    if (!ok) return "layout order broken at " + std::to_string(x);
  }
  return {};
}

std::vector<Triple> oracle_shuffle(const ShuffleInstance& inst) {
  auto out = inst.triples;
  std::stable_sort(out.begin(), out.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  return out;
}

std::vector<std::vector<std::int64_t>> oracle_combined_mxv(
    const ShuffleInstance& inst, const std::vector<std::vector<std::int64_t>>& input,
    const Semiring& s) {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(inst.w),
                                             std::vector<std::int64_t>(inst.N_R, s.zero));
  for (const auto& t : inst.triples) {
    auto& cell = out.at(t.l - 1).at(t.i - 1);
    cell = s.add(cell, s.mul(t.value, input.at(t.k - 1).at(t.j - 1)));
  }
  return out;
}

std::vector<Element> to_elements(const ShuffleInstance& inst) {
  std::vector<Element> out;
  out.reserve(inst.triples.size());
  for (std::size_t x = 0; x < inst.triples.size(); ++x) {
    const auto& t = inst.triples[x];
    out.push_back(Element{x, t.i, t.j, t.value, t.k, t.l, ElementKind::Data});
  }
  return out;
}

Triple to_triple(const Element& e) { return Triple{e.i, e.j, e.value, e.k, e.l}; }

void write_instance(std::ostream& os, const ShuffleInstance& inst) {
  os << inst.N_M << ' ' << inst.N_R << ' ' << inst.H << ' ' << inst.v << ' ' << inst.w << ' '
     << to_string(inst.layout) << ' ' << inst.seed << '\n';
  for (const auto& t : inst.triples)
    os << t.i << ' ' << t.j << ' ' << t.value << ' ' << t.k << ' ' << t.l << '\n';
}

ShuffleInstance read_instance(std::istream& is) {
  auto fail = [](const std::string& what) -> ShuffleInstance {
    throw PemError(ErrorKind::Parse, what);
  };
  std::string line;
  if (!std::getline(is, line)) return fail("missing header");
  std::istringstream head(line);
  ShuffleInstance inst;
  std::string layout;
  if (!(head >> inst.N_M >> inst.N_R >> inst.H >> inst.v >> inst.w >> layout >> inst.seed))
    return fail("malformed header");
  inst.layout = parse_layout(layout);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Triple t;
    std::string extra;
    if (!(row >> t.i >> t.j >> t.value >> t.k >> t.l) || (row >> extra))
      return fail("malformed triple line: " + line);
    inst.triples.push_back(t);
  }
  if (static_cast<std::int64_t>(inst.triples.size()) != inst.H)
    return fail("triple count does not match header");
  return inst;
}

}  // namespace pemsim
