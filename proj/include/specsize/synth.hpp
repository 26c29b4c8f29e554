#pragma once

#include <string>

#include <json.hpp>

#include "specsize/ihm.hpp"
#include "specsize/spectra.hpp"

namespace specsize {

enum class SynthKind { arc_manifold, two_sensor_common, peak_spectra };
SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

struct SynthSpec {
  SynthKind kind = SynthKind::peak_spectra;
  Index n_samples = 200;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double size_min = 208.0;
  double size_max = 483.0;

  // arc_manifold
  Index dim = 10;
  double angle = 1.5707963267948966;

  // two_sensor_common: nuisances uniform on [0, span]
  double span = 6.0;

  // peak_spectra
  Index n_peaks = 6;
  double coupling = 1.0;   // strength of the size dependence
  bool linear = false;     // spectra exactly affine in size
  double nuisance = 0.0;   // relative spread of a hidden concentration factor
  double grid_lo = 850.0;
  double grid_hi = 1800.0;
  Index grid_points = 476;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthData {
  SpectraSet set;
  /// Hidden variables per sample plus generator details:
  /// {spec, hidden: {name: [...]}, components?: [...]}
  nlohmann::json truth;
  Matrix sensor2;  // two_sensor_common only; rows aligned with set
};

/// Sample ids are "S0001", "S0002", ...; sizes are always attached.
SynthData synth_generate(const SynthSpec& spec);

}  // namespace specsize
