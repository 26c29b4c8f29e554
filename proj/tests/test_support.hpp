#pragma once

// Small data generators shared by the unit tests. They know the hidden
// variables they plant, which is what the tests use as oracles.

#include <cmath>
#include <numbers>

#include "specsize/common.hpp"

namespace specsize::testing {

struct ArcData {
  Matrix points;     // N x d
  Vector arclength;  // hidden parameter
};

/// Points on a planar circular arc of the given angle, rotated into d
/// dimensions by a random orthonormal 2-frame. Angles are random uniform.
inline ArcData make_arc(Index n, Index d, double angle, std::uint64_t seed, double noise = 0.0) {
  Rng rng(seed);
  Matrix frame(d, 2);
  for (Index i = 0; i < frame.size(); ++i) frame(i) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(frame);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, 2);
  ArcData out{Matrix(n, d), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, angle);
    out.arclength(i) = t;
    Eigen::Vector2d p(std::cos(t), std::sin(t));
    out.points.row(i) = (q * p).transpose();
    for (Index c = 0; c < d; ++c) out.points(i, c) += noise * rng.normal();
  }
  return out;
}

inline Matrix random_matrix(Index r, Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(lo, hi);
  return m;
}

inline double pearson(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

/// R^2 of an ordinary least-squares fit (with intercept) of each column of y
/// on x, averaged over the columns of y.
inline double ols_r2(const Matrix& x, const Matrix& y) {
  Matrix a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  const Matrix beta = a.colPivHouseholderQr().solve(y);
  const Matrix res = y - a * beta;
  double total = 0.0;
  for (Index c = 0; c < y.cols(); ++c) {
    const double ss_tot = (y.col(c).array() - y.col(c).mean()).square().sum();
    total += 1.0 - res.col(c).squaredNorm() / ss_tot;
  }
  return total / static_cast<double>(y.cols());
}

/// Flip b's columns to best match a's signs, then return max abs difference.
inline double sign_aligned_max_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Index c = 0; c < a.cols(); ++c) {
    const double plus = (a.col(c) - b.col(c)).cwiseAbs().maxCoeff();
    const double minus = (a.col(c) + b.col(c)).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::min(plus, minus));
  }
  return worst;
}

struct TwoSensorData {
  Matrix sensor1;  // (cos t, sin t, a)
  Matrix sensor2;  // (cos t, sin t, b)
  Matrix circle;   // (cos t, sin t)
};

/// Common angle t on a circle; independent nuisances a, b uniform on [0, span].
inline TwoSensorData make_two_sensor(Index n, double span, std::uint64_t seed) {
  Rng rng(seed);
  TwoSensorData d{Matrix(n, 3), Matrix(n, 3), Matrix(n, 2)};
  for (Index i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a = rng.uniform(0.0, span), b = rng.uniform(0.0, span);
    d.sensor1.row(i) << std::cos(t), std::sin(t), a;
    d.sensor2.row(i) << std::cos(t), std::sin(t), b;
    d.circle.row(i) << std::cos(t), std::sin(t);
  }
  return d;
}

}  // namespace specsize::testing
