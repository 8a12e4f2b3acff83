#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pemsim/machine.hpp"

namespace pemsim {

/// A non-zero x_ij of the shuffle matrix. k selects the input vector the
/// emitted pair is built from, l the output vector it contributes to.
struct Triple {
  std::int64_t i = 1;
  std::int64_t j = 1;
  std::int64_t value = 0;
  std::int32_t k = 1;
  std::int32_t l = 1;
  bool operator==(const Triple&) const = default;
};

enum class LayoutKind { MixedColumn, ColumnMajor, RowMajor, MetaColumn };

struct Layout {
  LayoutKind kind = LayoutKind::ColumnMajor;
  std::int64_t columns_per_meta = 0;  // MetaColumn only

  static Layout mixed() { return {LayoutKind::MixedColumn, 0}; }
  static Layout column() { return {LayoutKind::ColumnMajor, 0}; }
  static Layout row() { return {LayoutKind::RowMajor, 0}; }
  static Layout meta(std::int64_t c) { return {LayoutKind::MetaColumn, c}; }
  bool operator==(const Layout&) const = default;
};

std::string to_string(const Layout& layout);
/// Accepts mixed, column, row and meta:<c>.
Layout parse_layout(const std::string& token);

enum class Regularity { None, Column, Row, Both };

struct ShuffleInstance {
  std::int64_t N_M = 1;
  std::int64_t N_R = 1;
  std::int64_t H = 0;
  std::int32_t v = 1;
  std::int32_t w = 1;
  Layout layout;
  std::vector<Triple> triples;
  std::uint64_t seed = 0;

  bool operator==(const ShuffleInstance&) const = default;
};

struct GenerateParams {
  std::int64_t N_M = 1;
  std::int64_t N_R = 1;
  std::int64_t H = 0;
  std::int32_t v = 1;
  std::int32_t w = 1;
  Layout layout;
  Regularity regularity = Regularity::None;
  std::uint64_t seed = 0;
};

/// Draws a random matrix with distinct values 1..H and lays it out.
/// Throws PemError(Generation) for infeasible parameters.
ShuffleInstance generate(const GenerateParams& params);

/// Reorders the triples of `instance` into `layout`. Mixed columns are
/// shuffled with a generator derived from the instance seed.
void relayout(ShuffleInstance& instance, const Layout& layout);

/// Returns an empty string if the triples satisfy the instance's layout and
/// bounds, otherwise a description of the first violation.
std::string layout_violation(const ShuffleInstance& instance);

/// Triples sorted by (i, j).
std::vector<Triple> oracle_shuffle(const ShuffleInstance& instance);

struct Semiring {
  std::function<std::int64_t(std::int64_t, std::int64_t)> add = std::plus<std::int64_t>{};
  std::function<std::int64_t(std::int64_t, std::int64_t)> mul = std::multiplies<std::int64_t>{};
  std::int64_t zero = 0;
};

/// out[l-1][i-1] = sum over triples (i, j, x, k, l) of x * input[k-1][j-1].
std::vector<std::vector<std::int64_t>> oracle_combined_mxv(
    const ShuffleInstance& instance, const std::vector<std::vector<std::int64_t>>& input,
    const Semiring& semiring = {});

/// Element ids follow triple positions.
std::vector<Element> to_elements(const ShuffleInstance& instance);
Triple to_triple(const Element& e);

void write_instance(std::ostream& os, const ShuffleInstance& instance);
/// Throws PemError(Parse) on malformed input.
ShuffleInstance read_instance(std::istream& is);

}  // namespace pemsim
