#pragma once

#include <filesystem>
#include <optional>

#include "specsize/common.hpp"

namespace specsize {

struct KernelParams {
  double epsilon = 1.0;
  bool density_normalize = true;
};

/// Squared Euclidean distances between all row pairs. Exact zero diagonal.
Matrix pairwise_sq_distances(const Matrix& x);
/// Squared distances from every row of `a` to every row of `b`.
Matrix cross_sq_distances(const Matrix& a, const Matrix& b);

/// W_ij = exp(-D2_ij / eps^2)
Matrix gaussian_kernel(const Matrix& d2, double epsilon);
/// P^-1 W P^-1 with P = diag(row sums of W).
Matrix density_normalize(const Matrix& w);
/// D^-1 W with D = diag(row sums of W); rows sum to one.
Matrix markov_normalize(const Matrix& w);

/// sqrt of the median of the nonzero off-diagonal squared distances.
double epsilon_median_heuristic(const Matrix& d2);

/// Full kernel pipeline: Gaussian, optional density normalization, Markov.
Matrix markov_kernel(const Matrix& x, const KernelParams& params);

struct DmapModel {
  Matrix ref_points;          // N x d
  KernelParams params;
  Vector eigenvalues;         // descending, eigenvalues(0) == 1
  Matrix eigenvectors;        // N x m, column k is phi_k
  Vector p_row_sums;          // row sums of W (ones when density_normalize is off)
  Vector d_row_sums;          // row sums of the density-normalized kernel

  Index n_points() const { return ref_points.rows(); }
  Index n_eig() const { return eigenvalues.size(); }

  /// Markov-normalized kernel rows of new points against the reference set,
  /// using the stored normalization of the training points.
  Matrix kernel_rows(const Matrix& x_new) const;
  /// The training Markov matrix K.
  Matrix markov_matrix() const;
};

/// Leading n_eig eigenpairs of the Markov kernel. The eigenproblem is solved on
/// the symmetric conjugate D^-1/2 W~ D^-1/2 and mapped back, so eigenvalues
/// are real. Eigenvectors are scaled so phi_0 == 1 and each has its largest
/// magnitude entry positive.
DmapModel fit_dmaps(const Matrix& x, const KernelParams& params, Index n_eig);

inline constexpr double kNystromMinEigenvalue = 1e-6;

/// phi_k(x) = (1/lambda_k) sum_j K(x, x_j) phi_k(x_j) for each requested index.
/// Throws NumericError when a requested eigenvalue is below
/// kNystromMinEigenvalue.
Matrix nystrom_extend(const DmapModel& model, const Matrix& x_new, const IndexList& indices);
/// Number of leading eigenpairs that can be extended.
Index extendable_count(const DmapModel& model);

/// Local linear regression residuals for eigenvector selection.
struct LlrOptions {
  double bandwidth_scale = 1.0 / 3.0;  // kernel scale relative to the median distance
  double ridge = 1e-8;
  double threshold = 0.5;
};

struct EigenSelection {
  IndexList indices;   // columns of the candidate matrix with residual above threshold
  Vector residuals;    // residual per candidate column; the first one is 1 by convention
};

/// Column k is regressed on columns 0..k-1 with kernel-weighted local linear
/// fits (leave-one-out). A residual near 0 means column k is a function of the
/// earlier ones (a harmonic); near 1 means a new direction.
EigenSelection local_linear_residual(const Matrix& candidates, const LlrOptions& opts = {});
/// Residual of one column against a set of regressor columns.
double llr_residual(const Matrix& regressors, const Vector& target, const LlrOptions& opts = {});

/// Geometric-Harmonics regressor built on a second diffusion map over the
/// input coordinates. Targets are expanded in the retained eigenvectors
/// (eigenvalue >= cutoff * lambda_max) and extended with Nystrom.
struct GhModel {
  DmapModel basis;
  Matrix coefficients;   // retained x n_targets
  double cutoff = 1e-3;
  double training_residual = 0.0;  // max abs error at the training inputs
};

GhModel gh_fit(const Matrix& inputs, const Matrix& targets, const KernelParams& params,
               double cutoff = 1e-3);
Matrix gh_predict(const GhModel& model, const Matrix& coords);

/// Versioned on-disk form: dmap.json with metadata and eigenvalues, plus
/// CSV blocks for reference points, eigenvectors, and row sums.
void save_dmap(const DmapModel& model, const std::filesystem::path& dir);
DmapModel load_dmap(const std::filesystem::path& dir);

}  // namespace specsize
