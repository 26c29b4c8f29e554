#pragma once

// Peak structures for hard-model self-fit tests.

#include <algorithm>
#include <string>
#include <vector>

#include "specsize/ihm.hpp"

namespace specsize::testing {

inline Vector fingerprint_grid() { return Vector::LinSpaced(951, 850.0, 1800.0); }

// Three components with 23, 17 and 4 peaks. Positions sit on a jittered
// lattice with every component interleaved, so no two peaks coincide.
inline HardModel lattice_structure(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> names{"polymer", "monomer", "solvent"};
  const std::vector<Index> counts{23, 17, 4};
  std::vector<Index> owner;
  for (Index c = 0; c < 3; ++c) owner.insert(owner.end(), static_cast<std::size_t>(counts[c]), c);
  rng.shuffle(owner);

  HardModel m;
  for (const auto& n : names) m.components.push_back({n, {}});
  const double spacing = 900.0 / static_cast<double>(owner.size());
  for (std::size_t slot = 0; slot < owner.size(); ++slot) {
    Peak p;
    p.position = 875.0 + spacing * (static_cast<double>(slot) + 0.5) + rng.uniform(-3.0, 3.0);
    p.intensity = rng.uniform(0.2, 1.0);
    p.shape = rng.uniform(0.2, 0.8);
    p.hwhm = rng.uniform(2.0, 7.0);
    m.components[static_cast<std::size_t>(owner[slot])].peaks.push_back(p);
  }
  m.weights = {0.8, 0.5, 1.2};
  m.offset = 0.1;
  m.slope = 2e-4;
  return m;
}

inline HardModel perturbed(const HardModel& truth, FitMode mode, std::uint64_t seed) {
  Rng rng(seed);
  HardModel m = truth;
  m.offset = 0.0;
  m.slope = 0.0;
  for (double& w : m.weights) w *= rng.uniform(0.7, 1.3);
  for (auto& c : m.components) {
    for (auto& p : c.peaks) {
      p.position += rng.uniform(-1.5, 1.5);
      if (mode == FitMode::high) {
        p.intensity *= rng.uniform(0.9, 1.1);
        p.shape = std::clamp(p.shape + rng.uniform(-0.1, 0.1), 0.0, 1.0);
        p.hwhm *= rng.uniform(0.9, 1.1);
      }
    }
  }
  return m;
}

}  // namespace specsize::testing
