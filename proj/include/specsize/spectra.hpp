#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specsize/common.hpp"

namespace specsize {

/// Strictly increasing, finite wavenumber axis in cm^-1.
class WavenumberGrid {
 public:
  WavenumberGrid() = default;
  explicit WavenumberGrid(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }
  Eigen::Map<const Vector> as_vector() const {
    return {values_.data(), static_cast<Index>(values_.size())};
  }

  bool operator==(const WavenumberGrid&) const = default;

 private:
  std::vector<double> values_;
};

/// Samples in rows, wavenumbers in columns. Sizes are hydrodynamic
/// diameters in nm and are optional (unlabelled spectra for prediction).
class SpectraSet {
 public:
  SpectraSet(WavenumberGrid grid, Matrix intensities, std::vector<std::string> sample_ids,
             std::optional<Vector> sizes = std::nullopt);

  const WavenumberGrid& grid() const { return grid_; }
  const Matrix& intensities() const { return intensities_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  const std::optional<Vector>& sizes() const { return sizes_; }
  bool has_sizes() const { return sizes_.has_value(); }
  /// Throws DataError when no sizes are attached.
  const Vector& require_sizes() const;

  Index n_samples() const { return intensities_.rows(); }
  Index n_wavenumbers() const { return intensities_.cols(); }

  SpectraSet with_intensities(WavenumberGrid grid, Matrix intensities) const;
  SpectraSet with_sizes(std::optional<Vector> sizes) const;
  SpectraSet subset(const IndexList& rows) const;

 private:
  WavenumberGrid grid_;
  Matrix intensities_;
  std::vector<std::string> sample_ids_;
  std::optional<Vector> sizes_;
};

/// Spectra CSV: header `wavenumber,<id1>,<id2>,...`, then one row per
/// wavenumber `w,v1,v2,...`. Sizes CSV: header `sample_id,diameter_nm`.
SpectraSet load_spectra(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& sizes_path = std::nullopt);
SpectraSet parse_spectra_csv(const std::string& text);
std::vector<std::pair<std::string, double>> parse_sizes_csv(const std::string& text);
SpectraSet attach_sizes(const SpectraSet& set,
                        const std::vector<std::pair<std::string, double>>& sizes);

std::string format_spectra_csv(const SpectraSet& set);
std::string format_sizes_csv(const SpectraSet& set);
void save_spectra(const SpectraSet& set, const std::filesystem::path& path);
void save_sizes(const SpectraSet& set, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Generic numeric CSV with a header row; used for coordinate and model blocks.
void save_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                     const std::filesystem::path& path);
Matrix load_matrix_csv(const std::filesystem::path& path);

}  // namespace specsize
