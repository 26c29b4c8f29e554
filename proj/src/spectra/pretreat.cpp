#include "specsize/pretreat.hpp"

#include <cmath>

namespace specsize {

namespace {

void check_interval(const Interval& iv, const char* what) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi))
    throw ConfigError(std::string(what) + " interval must satisfy lo < hi");
}

bool inside(double w, const Interval& iv) { return w >= iv.lo && w <= iv.hi; }

double sample_sd(const Vector& y, double mean) {
  if (y.size() < 2) return 0.0;
  return std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1));
}

}  // namespace

SpectraSet apply_region(const SpectraSet& set, const PretreatmentSpec& spec) {
  const auto& grid = set.grid();
  Interval region{grid.front(), grid.back()};
  switch (spec.region) {
    case RegionKind::global:
      break;
    case RegionKind::fingerprint:
      region = {kFingerprintLo, kFingerprintHi};
      break;
    case RegionKind::custom:
      check_interval(spec.custom, "custom region");
      if (spec.custom.hi < grid.front() || spec.custom.lo > grid.back())
        throw ConfigError("custom region lies outside the wavenumber grid");
      region = spec.custom;
      break;
  }
  for (const auto& ex : spec.exclusions) check_interval(ex, "exclusion");

  IndexList keep;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double w = grid[c];
    if (!inside(w, region)) continue;
    bool excluded = false;
    for (const auto& ex : spec.exclusions) excluded = excluded || inside(w, ex);
    if (!excluded) keep.push_back(static_cast<Index>(c));
  }
  if (keep.empty()) throw DataError("no wavenumbers left after region filtering");
  if (keep.size() == grid.size()) return set;

  std::vector<double> values;
  values.reserve(keep.size());
  for (Index c : keep) values.push_back(grid[static_cast<std::size_t>(c)]);
  return set.with_intensities(WavenumberGrid(std::move(values)),
                              take_cols(set.intensities(), keep));
}

Vector baseline_linear_fit(const Vector& y, const WavenumberGrid& grid) {
  const Index n = y.size();
  if (n < 2 || static_cast<Index>(grid.size()) != n)
    throw DataError("linear baseline needs at least 2 points on a matching grid");
  const auto w = grid.as_vector();
  const double w_mean = w.mean();
  const double y_mean = y.mean();
  const double sxx = (w.array() - w_mean).square().sum();
  if (!(sxx > 0.0)) throw DataError("linear baseline: constant grid");
  const double sxy = ((w.array() - w_mean) * (y.array() - y_mean)).sum();
  const double slope = sxy / sxx;
  const double intercept = y_mean - slope * w_mean;
  return y.array() - (intercept + slope * w.array());
}

std::vector<std::size_t> lower_hull_indices(const WavenumberGrid& grid, const Vector& y) {
  // Andrew's monotone chain, lower half only. The grid is already sorted.
  std::vector<std::size_t> hull;
  const std::size_t n = static_cast<std::size_t>(y.size());
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull[hull.size() - 1];
      const double cross = (grid[b] - grid[a]) * (y(static_cast<Index>(i)) - y(static_cast<Index>(a))) -
                           (y(static_cast<Index>(b)) - y(static_cast<Index>(a))) * (grid[i] - grid[a]);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  return hull;
}

Vector baseline_rubber_band(const Vector& y, const WavenumberGrid& grid) {
  const Index n = y.size();
  if (n < 2 || static_cast<Index>(grid.size()) != n)
    throw DataError("rubber band baseline needs at least 2 points on a matching grid");
  const auto hull = lower_hull_indices(grid, y);
  Vector out(n);
  std::size_t seg = 0;
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    while (seg + 1 < hull.size() - 1 && hull[seg + 1] < ui) ++seg;
    const std::size_t a = hull[seg];
    const std::size_t b = hull[seg + 1];
    if (ui == a || ui == b) {
      out(i) = 0.0;
      continue;
    }
    const double t = (grid[ui] - grid[a]) / (grid[b] - grid[a]);
    const double base = y(static_cast<Index>(a)) + t * (y(static_cast<Index>(b)) - y(static_cast<Index>(a)));
    out(i) = y(i) - base;
  }
  return out;
}

Vector normalize_snv(const Vector& y) {
  const double mean = y.mean();
  const double sd = sample_sd(y, mean);
  if (!(sd > 0.0)) throw DataError("SNV: constant row has zero standard deviation");
  return (y.array() - mean) / sd;
}

Vector normalize_minmax(const Vector& y) {
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  if (!(hi > lo)) throw DataError("min-max: constant row");
  return (y.array() - lo) / (hi - lo);
}

ColumnScaler ColumnScaler::fit(const Matrix& m) {
  if (m.rows() < 2) throw DataError("zscore needs at least 2 rows");
  ColumnScaler s;
  s.mean = m.colwise().mean().transpose();
  s.sd.resize(m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    s.sd(c) = sample_sd(m.col(c), s.mean(c));
    if (!(s.sd(c) > 0.0))
      throw DataError("zscore: column " + std::to_string(c) + " has zero standard deviation");
  }
  return s;
}

Matrix ColumnScaler::apply(const Matrix& m) const {
  if (m.cols() != mean.size()) throw DataError("zscore: column count mismatch");
  return (m.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

Matrix zscore_columns(const Matrix& m) { return ColumnScaler::fit(m).apply(m); }

SpectraSet pretreat(const SpectraSet& set, const PretreatmentSpec& spec) {
  SpectraSet region = apply_region(set, spec);
  if (spec.baseline == Baseline::none && spec.normalization == Normalization::none) return region;
  Matrix m = region.intensities();
  for (Index r = 0; r < m.rows(); ++r) {
    Vector row = m.row(r).transpose();
    switch (spec.baseline) {
      case Baseline::none: break;
      case Baseline::linear_fit: row = baseline_linear_fit(row, region.grid()); break;
      case Baseline::rubber_band: row = baseline_rubber_band(row, region.grid()); break;
    }
    switch (spec.normalization) {
      case Normalization::none: break;
      case Normalization::snv: row = normalize_snv(row); break;
      case Normalization::minmax: row = normalize_minmax(row); break;
    }
    m.row(r) = row.transpose();
  }
  return region.with_intensities(region.grid(), std::move(m));
}

}  // namespace specsize
