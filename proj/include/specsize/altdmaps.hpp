#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "specsize/dmaps.hpp"

namespace specsize {

/// Alternating-diffusion operator K_alt = K1 * K2 over two aligned sensors.
struct AltDmapModel {
  KernelParams params1;
  KernelParams params2;
  Matrix sensor1;           // N x d1, the data K1 was built on
  Matrix sensor2;           // N x d2
  Vector eigenvalues;       // real parts, sorted by modulus, eigenvalues(0) == 1
  Matrix coordinates;       // Psi, N x m; column 0 is the constant vector
  EigenSelection selection; // over Psi columns; column 0 is never selected

  Index n_points() const { return coordinates.rows(); }
  Index n_eig() const { return eigenvalues.size(); }
};

/// Imaginary parts above this fraction of the modulus are treated as
/// numerical failure.
inline constexpr double kAltImagTolerance = 1e-8;

Matrix alternating_operator(const Matrix& x1, const Matrix& x2, const KernelParams& params1,
                            const KernelParams& params2);

/// Psi columns are scaled to unit RMS and sign-fixed like diffusion-map
/// eigenvectors. Selection uses local linear residuals over Psi_1..Psi_{m-1}.
AltDmapModel fit_altdmaps(const Matrix& x1, const Matrix& x2, const KernelParams& params1,
                          const KernelParams& params2, Index n_eig, const LlrOptions& llr = {});

Matrix alt_coordinates(const AltDmapModel& model, const IndexList& indices);

/// alt.json manifest (both bandwidths, sample alignment, eigenvalues,
/// selection) plus CSV blocks for Psi and both sensors.
void save_altdmap(const AltDmapModel& model, const std::vector<std::string>& sample_ids,
                  const std::filesystem::path& dir);
AltDmapModel load_altdmap(const std::filesystem::path& dir, std::vector<std::string>* sample_ids = nullptr);

}  // namespace specsize
