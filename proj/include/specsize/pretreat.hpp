#pragma once

#include <utility>
#include <vector>

#include "specsize/spectra.hpp"

namespace specsize {

enum class Baseline { none, linear_fit, rubber_band };
enum class Normalization { none, snv, minmax };
enum class RegionKind { global, fingerprint, custom };

inline constexpr double kFingerprintLo = 850.0;
inline constexpr double kFingerprintHi = 1800.0;

struct Interval {
  double lo;
  double hi;
};

struct PretreatmentSpec {
  Baseline baseline = Baseline::none;
  Normalization normalization = Normalization::none;
  RegionKind region = RegionKind::global;
  Interval custom{0.0, 0.0};
  std::vector<Interval> exclusions;
};

/// Keep columns inside the region (closed interval) and outside every
/// exclusion (closed interval). Exclusions that miss the grid are no-ops.
SpectraSet apply_region(const SpectraSet& set, const PretreatmentSpec& spec);

/// y minus its ordinary least-squares line over the grid.
Vector baseline_linear_fit(const Vector& y, const WavenumberGrid& grid);

/// y minus the lower convex hull of (w, y), interpolated between vertices.
Vector baseline_rubber_band(const Vector& y, const WavenumberGrid& grid);
/// Indices of the lower hull vertices, ordered by wavenumber. Collinear
/// points are not hull vertices.
std::vector<std::size_t> lower_hull_indices(const WavenumberGrid& grid, const Vector& y);

/// Per-row standard normal variate with the sample (n-1) standard deviation.
Vector normalize_snv(const Vector& y);
Vector normalize_minmax(const Vector& y);

/// Column means and sample standard deviations, reused to map held-out data
/// into the training scale.
struct ColumnScaler {
  Vector mean;
  Vector sd;

  static ColumnScaler fit(const Matrix& m);
  Matrix apply(const Matrix& m) const;
};
Matrix zscore_columns(const Matrix& m);

/// Region -> baseline -> normalization, row by row.
SpectraSet pretreat(const SpectraSet& set, const PretreatmentSpec& spec);

}  // namespace specsize
