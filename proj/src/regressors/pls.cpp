#include <cmath>
#include <limits>

#include "specsize/metrics.hpp"
#include "specsize/regressors.hpp"

namespace specsize {

namespace {

constexpr int kMaxIterations = 500;
constexpr double kTolerance = 1e-12;

Index largest_variance_column(const Matrix& y) {
  Index best = 0;
  double best_var = -1.0;
  for (Index c = 0; c < y.cols(); ++c) {
    const double v = y.col(c).squaredNorm();
    if (v > best_var) {
      best_var = v;
      best = c;
    }
  }
  return best;
}

}  // namespace

PlsModel pls_fit(const Matrix& x, const Matrix& y, Index n_components) {
  const Index n = x.rows(), p = x.cols();
  if (n == 0 || p == 0) throw DataError("pls: empty feature matrix");
  if (y.rows() != n) throw DataError("pls: X rows do not match y length");
  if (y.cols() == 0) throw DataError("pls: empty target matrix");
  if (!x.allFinite() || !y.allFinite()) throw DataError("pls: non-finite training data");
  if (n_components < 1 || n_components > std::min(n - 1, p))
    throw ConfigError("pls: n_components must be in [1, min(n-1, p)] = [1, " +
                      std::to_string(std::min(n - 1, p)) + "]");

  PlsModel m;
  m.n_components = n_components;
  m.x_mean = x.colwise().mean().transpose();
  m.y_mean = y.colwise().mean().transpose();
  const Matrix x0 = x.rowwise() - m.x_mean.transpose();
  const Matrix y0 = y.rowwise() - m.y_mean.transpose();
  const double x_norm = x0.norm();

  m.weights.resize(p, n_components);
  m.x_loadings.resize(p, n_components);
  m.y_loadings.resize(y.cols(), n_components);
  m.scores.resize(n, n_components);

  Matrix xr = x0;
  for (Index a = 0; a < n_components; ++a) {
    if (!(xr.norm() > 1e-10 * x_norm))
      throw NumericError("pls: zero variance left in X after " + std::to_string(a) + " components");

    Vector u = y0.col(largest_variance_column(y0));
    Vector w, t, q;
    Vector t_old = Vector::Zero(n);
    for (int it = 0; it < kMaxIterations; ++it) {
      w = xr.transpose() * u;
      if (!(w.norm() > 1e-14 * xr.norm() * std::max(u.norm(), 1e-300))) {
        // No covariance left with Y: fall back to the dominant direction of X.
        Eigen::JacobiSVD<Matrix> svd(xr, Eigen::ComputeThinV);
        w = svd.matrixV().col(0);
      }
      w.normalize();
      t = xr * w;
      q = y0.transpose() * t / t.squaredNorm();
      if (y.cols() == 1 || (t - t_old).norm() <= kTolerance * t.norm()) break;
      t_old = t;
      const double qq = q.squaredNorm();
      if (!(qq > 0.0)) break;
      u = y0 * q / qq;
    }
    const Vector pl = xr.transpose() * t / t.squaredNorm();
    xr -= t * pl.transpose();

    m.weights.col(a) = w;
    m.x_loadings.col(a) = pl;
    m.y_loadings.col(a) = q;
    m.scores.col(a) = t;
  }

  const Matrix ptw = m.x_loadings.transpose() * m.weights;
  Eigen::FullPivLU<Matrix> lu(ptw);
  if (!lu.isInvertible()) throw NumericError("pls: singular loading-weight product");
  m.coefficients = m.weights * lu.inverse() * m.y_loadings.transpose();
  if (!m.coefficients.allFinite()) throw NumericError("pls: non-finite coefficients");
  return m;
}

Matrix pls_predict(const PlsModel& model, const Matrix& x) {
  if (x.cols() != model.x_mean.size()) throw DataError("pls: input dimension mismatch");
  return ((x.rowwise() - model.x_mean.transpose()) * model.coefficients).rowwise() +
         model.y_mean.transpose();
}

PlsChoice pls_choose_components(const Matrix& x, const Matrix& y, Index k_max, Index folds,
                                std::uint64_t seed) {
  if (x.rows() != y.rows()) throw DataError("pls: X rows do not match y length");
  if (folds < 2) throw ConfigError("pls: need at least 2 folds");
  if (k_max < 1) throw ConfigError("pls: k_max must be >= 1");
  const auto split = kfold_indices(x.rows(), folds, seed);
  Index cap = std::min(k_max, x.cols());
  for (const auto& f : split) cap = std::min(cap, static_cast<Index>(f.train.size()) - 1);
  if (cap < 1) throw DataError("pls: too few samples for cross-validation");

  struct FoldData {
    Matrix xt, yt, xv, yv;
  };
  std::vector<FoldData> data;
  for (const auto& f : split)
    data.push_back({take_rows(x, f.train), take_rows(y, f.train), take_rows(x, f.validation),
                    take_rows(y, f.validation)});

  PlsChoice choice;
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 1; k <= cap; ++k) {
    double sse = 0.0;
    bool failed = false;
    for (const auto& d : data) {
      try {
        sse += (pls_predict(pls_fit(d.xt, d.yt, k), d.xv) - d.yv).squaredNorm();
      } catch (const NumericError&) {
        if (k == 1) throw;
        failed = true;
        break;
      }
    }
    if (failed) break;
    const double mse = sse / static_cast<double>(y.size());
    choice.cv_mse.push_back(mse);
    if (mse < best) {
      best = mse;
      choice.n_components = k;
    }
  }
  return choice;
}

nlohmann::json pls_to_json(const PlsModel& m) {
  return {{"format", "specsize.pls"},
          {"version", 1},
          {"n_components", m.n_components},
          {"x_mean", vector_to_json(m.x_mean)},
          {"y_mean", vector_to_json(m.y_mean)},
          {"weights", matrix_to_json(m.weights)},
          {"x_loadings", matrix_to_json(m.x_loadings)},
          {"y_loadings", matrix_to_json(m.y_loadings)},
          {"coefficients", matrix_to_json(m.coefficients)}};
}

PlsModel pls_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "specsize.pls" || j.value("version", 0) != 1)
    throw DataError("pls model: unsupported format or version");
  PlsModel m;
  m.n_components = j.at("n_components").get<Index>();
  m.x_mean = vector_from_json(j.at("x_mean"));
  m.y_mean = vector_from_json(j.at("y_mean"));
  m.weights = matrix_from_json(j.at("weights"));
  m.x_loadings = matrix_from_json(j.at("x_loadings"));
  m.y_loadings = matrix_from_json(j.at("y_loadings"));
  m.coefficients = matrix_from_json(j.at("coefficients"));
  if (m.coefficients.rows() != m.x_mean.size() || m.coefficients.cols() != m.y_mean.size())
    throw DataError("pls model: coefficient shape mismatch");
  return m;
}

}  // namespace specsize
