#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specsize/common.hpp"

namespace specsize {

/// Pseudo-Voigt line in amplitude form: the value at `position` equals
/// `intensity`, and both the Gaussian and Lorentzian parts halve at
/// position +/- hwhm.
struct Peak {
  double position = 0.0;   // cm^-1
  double intensity = 1.0;  // >= 0
  double shape = 0.5;      // Gaussian fraction in [0, 1]
  double hwhm = 1.0;       // > 0, cm^-1

  void validate() const;
};

struct ComponentModel {
  std::string name;
  std::vector<Peak> peaks;

  void validate() const;
};

struct HardModel {
  std::vector<ComponentModel> components;
  std::vector<double> weights;  // one per component, >= 0
  double offset = 0.0;
  double slope = 0.0;

  void validate() const;
  Index peak_count() const;
};

enum class FitMode { medium, high };
FitMode parse_fit_mode(const std::string& name);
std::string to_string(FitMode mode);

Vector pseudo_voigt_eval(const Peak& peak, const Vector& grid);
/// offset + slope * w + sum_c weight_c * sum_p pseudo_voigt(p, w)
Vector hard_model_eval(const HardModel& model, const Vector& grid);

/// medium: 2 + components + peaks; high: 2 + components + 4 * peaks.
Index free_parameter_count(const HardModel& model, FitMode mode);

/// Flattening order: offset, slope, component weights, then for every
/// component in order and every peak in order either the position
/// (medium) or position, intensity, shape, hwhm (high).
Vector extract_parameters(const HardModel& model, FitMode mode);
/// Inverse of extract_parameters; parameters not free in `mode` are taken
/// from `base`.
HardModel rebuild_model(const HardModel& base, const Vector& params, FitMode mode);
std::vector<std::string> parameter_names(const HardModel& model, FitMode mode);

/// d spectrum / d parameter, columns in extract_parameters order.
Matrix hard_model_jacobian(const HardModel& model, const Vector& grid, FitMode mode);

struct FitOptions {
  double position_shift = 5.0;  // cm^-1 box around the initial positions
  double lambda0 = 1e-3;
  Index max_iterations = 200;
  double gradient_tolerance = 1e-10;
};

struct FitResult {
  HardModel model;
  double sse = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> sse_history;  // initial SSE, then after every accepted step
};

/// Projected Levenberg-Marquardt over the free parameters of `mode`.
/// Positions stay within +/- position_shift of their initial values;
/// weights and intensities stay >= 0, shapes in [0, 1], hwhm positive.
/// Returns the best point found with converged = false when the
/// iteration budget runs out. Throws NumericError if the Jacobian has no
/// usable column.
FitResult fit_hard_model(const HardModel& initial, const Vector& grid, const Vector& spectrum,
                         FitMode mode, const FitOptions& options = {});

/// Component built from the strongest local maxima of a spectrum: at most
/// `max_peaks` peaks above `min_fraction` of the maximum, in ascending
/// position, with hwhm from the half-maximum crossings and shape 0.5.
ComponentModel seed_component(const std::string& name, const Vector& grid, const Vector& spectrum,
                              Index max_peaks, double min_fraction = 0.05);

nlohmann::json component_to_json(const ComponentModel& c);
ComponentModel component_from_json(const nlohmann::json& j);
/// Unit weights and a zero baseline.
HardModel hard_model_from_components(std::vector<ComponentModel> components);

}  // namespace specsize
