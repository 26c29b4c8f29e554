#include "specsize/dmaps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace specsize {

Matrix pairwise_sq_distances(const Matrix& x) {
  if (x.rows() < 2) throw DataError("pairwise distances need at least 2 points");
  if (!x.allFinite()) throw DataError("pairwise distances: non-finite input");
  const Index n = x.rows();
  Matrix d2 = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

Matrix cross_sq_distances(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DataError("distance: dimension mismatch");
  if (!a.allFinite() || !b.allFinite()) throw DataError("distance: non-finite input");
  Matrix d2(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) d2(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d2;
}

Matrix gaussian_kernel(const Matrix& d2, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("kernel bandwidth epsilon must be positive");
  return (-d2.array() / (epsilon * epsilon)).exp();
}

Matrix density_normalize(const Matrix& w) {
  const Vector p = w.rowwise().sum();
  if ((p.array() <= 0.0).any()) throw NumericError("density normalization: zero row sum");
  const Vector inv = p.cwiseInverse();
  return inv.asDiagonal() * w * inv.asDiagonal();
}

Matrix markov_normalize(const Matrix& w) {
  const Vector d = w.rowwise().sum();
  if ((d.array() <= 0.0).any()) throw NumericError("Markov normalization: zero row sum");
  return d.cwiseInverse().asDiagonal() * w;
}

double epsilon_median_heuristic(const Matrix& d2) {
  if (d2.rows() < 2 || d2.rows() != d2.cols()) throw DataError("median heuristic needs N >= 2");
  std::vector<double> vals;
  for (Index i = 0; i < d2.rows(); ++i) {
    for (Index j = i + 1; j < d2.cols(); ++j) {
      if (d2(i, j) > 0.0) vals.push_back(d2(i, j));
    }
  }
  if (vals.empty()) throw NumericError("median heuristic: all distances are zero");
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  double median = vals[mid];
  if (vals.size() % 2 == 0) {
    const double lower = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return std::sqrt(median);
}

Matrix markov_kernel(const Matrix& x, const KernelParams& params) {
  Matrix w = gaussian_kernel(pairwise_sq_distances(x), params.epsilon);
  if (params.density_normalize) w = density_normalize(w);
  return markov_normalize(w);
}

namespace {

struct SymmetricSpectrum {
  Vector p;
  Vector d;
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // phi, scaled and sign-fixed
};

SymmetricSpectrum diffusion_spectrum(const Matrix& x, const KernelParams& params, Index n_keep) {
  const Index n = x.rows();
  Matrix w = gaussian_kernel(pairwise_sq_distances(x), params.epsilon);
  SymmetricSpectrum out;
  out.p = w.rowwise().sum();
  if (params.density_normalize) {
    const Vector inv = out.p.cwiseInverse();
    w = inv.asDiagonal() * w * inv.asDiagonal();
  } else {
    out.p.setOnes();
  }
  out.d = w.rowwise().sum();
  if ((out.d.array() <= 0.0).any()) throw NumericError("diffusion map: zero row sum");
  const Vector inv_sqrt_d = out.d.cwiseSqrt().cwiseInverse();
  Matrix s = inv_sqrt_d.asDiagonal() * w * inv_sqrt_d.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) throw NumericError("diffusion map: eigensolver failed");

  const double scale = std::sqrt(out.d.sum());
  out.eigenvalues.resize(n_keep);
  out.eigenvectors.resize(n, n_keep);
  for (Index k = 0; k < n_keep; ++k) {
    const Index src = n - 1 - k;  // solver sorts ascending
    out.eigenvalues(k) = solver.eigenvalues()(src);
    Vector phi = scale * inv_sqrt_d.cwiseProduct(solver.eigenvectors().col(src));
    fix_sign(phi);
    out.eigenvectors.col(k) = phi;
  }
  return out;
}

}  // namespace

DmapModel fit_dmaps(const Matrix& x, const KernelParams& params, Index n_eig) {
  if (n_eig < 2) throw ConfigError("diffusion map needs n_eig >= 2");
  if (x.rows() <= n_eig) throw DataError("diffusion map needs more points than eigenpairs");
  auto spec = diffusion_spectrum(x, params, n_eig);
  DmapModel m;
  m.ref_points = x;
  m.params = params;
  m.eigenvalues = std::move(spec.eigenvalues);
  m.eigenvectors = std::move(spec.eigenvectors);
  m.p_row_sums = std::move(spec.p);
  m.d_row_sums = std::move(spec.d);
  return m;
}

Matrix DmapModel::kernel_rows(const Matrix& x_new) const {
  if (x_new.cols() != ref_points.cols())
    throw DataError("Nystrom: new points have dimension " + std::to_string(x_new.cols()) +
                    ", model expects " + std::to_string(ref_points.cols()));
  Matrix w = gaussian_kernel(cross_sq_distances(x_new, ref_points), params.epsilon);
  if (params.density_normalize) {
    const Vector p_new = w.rowwise().sum();
    if ((p_new.array() <= 0.0).any())
      throw NumericError("Nystrom: new point has zero kernel mass (underflow); increase epsilon");
    w = p_new.cwiseInverse().asDiagonal() * w * p_row_sums.cwiseInverse().asDiagonal();
  }
  const Vector d_new = w.rowwise().sum();
  if ((d_new.array() <= 0.0).any())
    throw NumericError("Nystrom: new point has zero kernel mass (underflow); increase epsilon");
  return d_new.cwiseInverse().asDiagonal() * w;
}

Matrix DmapModel::markov_matrix() const { return markov_kernel(ref_points, params); }

Index extendable_count(const DmapModel& model) {
  Index k = 0;
  while (k < model.n_eig() && model.eigenvalues(k) >= kNystromMinEigenvalue) ++k;
  return k;
}

Matrix nystrom_extend(const DmapModel& model, const Matrix& x_new, const IndexList& indices) {
  for (Index k : indices) {
    if (k < 0 || k >= model.n_eig()) throw ConfigError("Nystrom: eigenvector index out of range");
    if (model.eigenvalues(k) < kNystromMinEigenvalue)
      throw NumericError("Nystrom: eigenvalue " + std::to_string(k) +
                         " is too small to extend stably");
  }
  const Matrix k_rows = model.kernel_rows(x_new);
  Matrix out(x_new.rows(), static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const Index k = indices[c];
    out.col(static_cast<Index>(c)) = (k_rows * model.eigenvectors.col(k)) / model.eigenvalues(k);
  }
  return out;
}

namespace {

double median_distance(const Matrix& x) {
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = i + 1; j < x.rows(); ++j) vals.push_back((x.row(i) - x.row(j)).norm());
  }
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  return vals[mid];
}

}  // namespace

double llr_residual(const Matrix& regressors, const Vector& target, const LlrOptions& opts) {
  const Index n = regressors.rows();
  const Index q = regressors.cols();
  if (n < 3 || target.size() != n) throw DataError("local linear regression: bad shapes");
  const double h = opts.bandwidth_scale * median_distance(regressors);
  if (!(h > 0.0)) throw NumericError("local linear regression: degenerate regressors");
  const double inv_h2 = 1.0 / (h * h);

  Vector fitted(n);
  Matrix ata(q + 1, q + 1);
  Vector atb(q + 1);
  Eigen::RowVectorXd row(q + 1);
  for (Index i = 0; i < n; ++i) {
    ata.setZero();
    atb.setZero();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto diff = regressors.row(j) - regressors.row(i);
      const double w = std::exp(-diff.squaredNorm() * inv_h2);
      if (w == 0.0) continue;
      row(0) = 1.0;
      row.tail(q) = diff;
      ata.noalias() += w * row.transpose() * row;
      atb.noalias() += w * target(j) * row.transpose();
    }
    ata.diagonal().array() += opts.ridge;
    const Vector beta = ata.ldlt().solve(atb);
    fitted(i) = beta(0);
  }
  const double denom = (target.array() - target.mean()).square().sum();
  if (!(denom > 0.0)) return 0.0;
  return std::sqrt((target - fitted).squaredNorm() / denom);
}

EigenSelection local_linear_residual(const Matrix& candidates, const LlrOptions& opts) {
  if (candidates.cols() < 2) throw DataError("local linear residual needs >= 2 candidate columns");
  EigenSelection sel;
  sel.residuals.resize(candidates.cols());
  sel.residuals(0) = 1.0;
  for (Index k = 1; k < candidates.cols(); ++k) {
    sel.residuals(k) = llr_residual(candidates.leftCols(k), candidates.col(k), opts);
  }
  for (Index k = 0; k < candidates.cols(); ++k) {
    if (sel.residuals(k) > opts.threshold) sel.indices.push_back(k);
  }
  return sel;
}

GhModel gh_fit(const Matrix& inputs, const Matrix& targets, const KernelParams& params,
               double cutoff) {
  if (inputs.rows() < 2) throw DataError("geometric harmonics need at least 2 points");
  if (targets.rows() != inputs.rows()) throw DataError("geometric harmonics: row mismatch");
  if (!(cutoff > 0.0)) throw ConfigError("geometric harmonics cutoff must be positive");
  const Index n = inputs.rows();
  auto spec = diffusion_spectrum(inputs, params, n);
  const double lmax = spec.eigenvalues(0);
  Index keep = 0;
  while (keep < n && spec.eigenvalues(keep) >= cutoff * lmax &&
         spec.eigenvalues(keep) >= kNystromMinEigenvalue)
    ++keep;
  if (keep == 0) throw NumericError("geometric harmonics: no harmonic survives the cutoff");

  GhModel gh;
  gh.cutoff = cutoff;
  gh.basis.ref_points = inputs;
  gh.basis.params = params;
  gh.basis.eigenvalues = spec.eigenvalues.head(keep);
  gh.basis.eigenvectors = spec.eigenvectors.leftCols(keep);
  gh.basis.p_row_sums = spec.p;
  gh.basis.d_row_sums = spec.d;

  // phi_k^T D phi_l = sum(d) delta_kl, so projection uses the D inner product.
  const Matrix& phi = gh.basis.eigenvectors;
  gh.coefficients = (phi.transpose() * spec.d.asDiagonal() * targets) / spec.d.sum();
  gh.training_residual = (phi * gh.coefficients - targets).cwiseAbs().maxCoeff();
  return gh;
}

Matrix gh_predict(const GhModel& model, const Matrix& coords) {
  const Matrix k_rows = model.basis.kernel_rows(coords);
  Matrix ext = k_rows * model.basis.eigenvectors;
  ext = ext * model.basis.eigenvalues.cwiseInverse().asDiagonal();
  return ext * model.coefficients;
}

}  // namespace specsize
