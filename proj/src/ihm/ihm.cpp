#include "specsize/ihm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace specsize {

namespace {

constexpr double kMinHwhm = 1e-6;
constexpr double kMinLambda = 1e-12;
constexpr double kMaxLambda = 1e16;

struct Shape {
  double g, l, u;
};

Shape shape_terms(const Peak& p, double x) {
  const double u = (x - p.position) / p.hwhm;
  return {std::exp(-std::numbers::ln2 * u * u), 1.0 / (1.0 + u * u), u};
}

Index params_per_peak(FitMode mode) { return mode == FitMode::medium ? 1 : 4; }

}  // namespace

void Peak::validate() const {
  if (!std::isfinite(position)) throw DataError("peak position must be finite");
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw DataError("peak intensity must be >= 0");
  if (!(shape >= 0.0 && shape <= 1.0)) throw DataError("peak shape must be in [0, 1]");
  if (!(hwhm > 0.0) || !std::isfinite(hwhm)) throw DataError("peak hwhm must be positive");
}

void ComponentModel::validate() const {
  if (peaks.empty()) throw DataError("component '" + name + "' has no peaks");
  for (const auto& p : peaks) p.validate();
}

void HardModel::validate() const {
  if (components.empty()) throw DataError("hard model has no components");
  if (weights.size() != components.size()) throw DataError("hard model needs one weight per component");
  for (const auto& c : components) c.validate();
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("component weights must be >= 0");
  if (!std::isfinite(offset) || !std::isfinite(slope)) throw DataError("baseline must be finite");
}

Index HardModel::peak_count() const {
  Index n = 0;
  for (const auto& c : components) n += static_cast<Index>(c.peaks.size());
  return n;
}

FitMode parse_fit_mode(const std::string& name) {
  if (name == "medium") return FitMode::medium;
  if (name == "high") return FitMode::high;
  throw ConfigError("unknown IHM fit mode: " + name);
}

std::string to_string(FitMode mode) { return mode == FitMode::medium ? "medium" : "high"; }

Vector pseudo_voigt_eval(const Peak& peak, const Vector& grid) {
  peak.validate();
  Vector out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const Shape s = shape_terms(peak, grid(i));
    out(i) = peak.intensity * (peak.shape * s.g + (1.0 - peak.shape) * s.l);
  }
  return out;
}

Vector hard_model_eval(const HardModel& model, const Vector& grid) {
  model.validate();
  Vector out = (model.offset + model.slope * grid.array()).matrix();
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    if (model.weights[c] == 0.0) continue;
    for (const auto& p : model.components[c].peaks) out += model.weights[c] * pseudo_voigt_eval(p, grid);
  }
  return out;
}

Index free_parameter_count(const HardModel& model, FitMode mode) {
  return 2 + static_cast<Index>(model.components.size()) + params_per_peak(mode) * model.peak_count();
}

Vector extract_parameters(const HardModel& model, FitMode mode) {
  Vector v(free_parameter_count(model, mode));
  Index k = 0;
  v(k++) = model.offset;
  v(k++) = model.slope;
  for (double w : model.weights) v(k++) = w;
  for (const auto& c : model.components) {
    for (const auto& p : c.peaks) {
      v(k++) = p.position;
      if (mode == FitMode::high) {
        v(k++) = p.intensity;
        v(k++) = p.shape;
        v(k++) = p.hwhm;
      }
    }
  }
  return v;
}

HardModel rebuild_model(const HardModel& base, const Vector& params, FitMode mode) {
  if (params.size() != free_parameter_count(base, mode))
    throw DataError("hard model parameter vector has the wrong length");
  HardModel m = base;
  Index k = 0;
  m.offset = params(k++);
  m.slope = params(k++);
  for (double& w : m.weights) w = params(k++);
  for (auto& c : m.components) {
    for (auto& p : c.peaks) {
      p.position = params(k++);
      if (mode == FitMode::high) {
        p.intensity = params(k++);
        p.shape = params(k++);
        p.hwhm = params(k++);
      }
    }
  }
  return m;
}

std::vector<std::string> parameter_names(const HardModel& model, FitMode mode) {
  std::vector<std::string> names{"offset", "slope"};
  for (const auto& c : model.components) names.push_back("weight_" + c.name);
  for (const auto& c : model.components) {
    for (std::size_t i = 0; i < c.peaks.size(); ++i) {
      const std::string stem = c.name + "_p" + std::to_string(i + 1) + "_";
      names.push_back(stem + "position");
      if (mode == FitMode::high) {
        names.push_back(stem + "intensity");
        names.push_back(stem + "shape");
        names.push_back(stem + "hwhm");
      }
    }
  }
  return names;
}

Matrix hard_model_jacobian(const HardModel& model, const Vector& grid, FitMode mode) {
  const Index n = grid.size();
  Matrix j = Matrix::Zero(n, free_parameter_count(model, mode));
  j.col(0).setOnes();
  j.col(1) = grid;
  const Index nc = static_cast<Index>(model.components.size());
  Index k = 2 + nc;
  for (Index c = 0; c < nc; ++c) {
    const double w = model.weights[static_cast<std::size_t>(c)];
    for (const auto& p : model.components[static_cast<std::size_t>(c)].peaks) {
      for (Index i = 0; i < n; ++i) {
        const Shape s = shape_terms(p, grid(i));
        const double profile = p.shape * s.g + (1.0 - p.shape) * s.l;
        j(i, 2 + c) += p.intensity * profile;
        const double dshape_du = p.shape * (-2.0 * std::numbers::ln2 * s.u * s.g) +
                                 (1.0 - p.shape) * (-2.0 * s.u * s.l * s.l);
        j(i, k) = w * p.intensity * dshape_du * (-1.0 / p.hwhm);
        if (mode == FitMode::high) {
          j(i, k + 1) = w * profile;
          j(i, k + 2) = w * p.intensity * (s.g - s.l);
          j(i, k + 3) = w * p.intensity * dshape_du * (-s.u / p.hwhm);
        }
      }
      k += params_per_peak(mode);
    }
  }
  return j;
}

FitResult fit_hard_model(const HardModel& initial, const Vector& grid, const Vector& spectrum,
                         FitMode mode, const FitOptions& options) {
  initial.validate();
  if (grid.size() != spectrum.size()) throw DataError("ihm: spectrum does not match the grid");
  if (grid.size() < 2) throw DataError("ihm: grid too short");
  if (!spectrum.allFinite()) throw DataError("ihm: non-finite spectrum");
  if (!(options.position_shift >= 0.0) || !(options.lambda0 > 0.0) || options.max_iterations < 1)
    throw ConfigError("ihm: invalid fit options");
  const double lo_grid = grid.minCoeff(), hi_grid = grid.maxCoeff();
  for (const auto& c : initial.components)
    for (const auto& p : c.peaks)
      if (p.position < lo_grid || p.position > hi_grid)
        throw DataError("ihm: peak of '" + c.name + "' lies outside the grid");

  const Index k = free_parameter_count(initial, mode);
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vector lo = Vector::Constant(k, -inf), hi = Vector::Constant(k, inf);
  {
    const Index nc = static_cast<Index>(initial.components.size());
    lo.segment(2, nc).setZero();
    Index idx = 2 + nc;
    for (const auto& c : initial.components) {
      for (const auto& p : c.peaks) {
        lo(idx) = p.position - options.position_shift;
        hi(idx) = p.position + options.position_shift;
        if (mode == FitMode::high) {
          lo(idx + 1) = 0.0;
          lo(idx + 2) = 0.0;
          hi(idx + 2) = 1.0;
          lo(idx + 3) = kMinHwhm;
        }
        idx += params_per_peak(mode);
      }
    }
  }
  auto project = [&](Vector v) { return v.cwiseMax(lo).cwiseMin(hi); };
  auto sse_of = [&](const HardModel& m) { return (spectrum - hard_model_eval(m, grid)).squaredNorm(); };

  FitResult res;
  Vector p = project(extract_parameters(initial, mode));
  res.model = rebuild_model(initial, p, mode);
  res.sse = sse_of(res.model);
  res.sse_history.push_back(res.sse);
  double lambda = options.lambda0;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    const Matrix j = hard_model_jacobian(res.model, grid, mode);
    const Vector r = spectrum - hard_model_eval(res.model, grid);
    const Vector g = j.transpose() * r;  // descent direction of SSE / 2
    Vector pg = g;
    for (Index i = 0; i < k; ++i)
      if ((p(i) <= lo(i) && g(i) < 0.0) || (p(i) >= hi(i) && g(i) > 0.0)) pg(i) = 0.0;
    if (pg.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    const Matrix a = j.transpose() * j;
    const double max_diag = a.diagonal().maxCoeff();
    if (!(max_diag > 0.0)) throw NumericError("ihm: Jacobian rank collapse (all columns zero)");
    const Vector scale = a.diagonal().cwiseMax(1e-12 * max_diag);

    bool accepted = false;
    while (lambda <= kMaxLambda) {
      Matrix lhs = a;
      lhs.diagonal() += lambda * scale;
      const Vector step = lhs.ldlt().solve(g);
      if (!step.allFinite()) throw NumericError("ihm: Jacobian rank collapse");
      const Vector trial = project(p + step);
      const HardModel m = rebuild_model(initial, trial, mode);
      const double sse = sse_of(m);
      if (sse < res.sse) {
        p = trial;
        res.model = m;
        res.sse = sse;
        res.sse_history.push_back(sse);
        lambda = std::max(lambda / 10.0, kMinLambda);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No damped step lowers the SSE: a stationary point to working precision.
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

ComponentModel seed_component(const std::string& name, const Vector& grid, const Vector& spectrum,
                              Index max_peaks, double min_fraction) {
  if (grid.size() != spectrum.size() || grid.size() < 3) throw DataError("seed: spectrum does not match grid");
  if (max_peaks < 1) throw ConfigError("seed: max_peaks must be >= 1");
  const double top = spectrum.maxCoeff();
  IndexList maxima;
  for (Index i = 1; i + 1 < spectrum.size(); ++i)
    if (spectrum(i) > spectrum(i - 1) && spectrum(i) >= spectrum(i + 1) && spectrum(i) >= min_fraction * top)
      maxima.push_back(i);
  if (maxima.empty()) throw DataError("seed: no local maxima above threshold");
  std::stable_sort(maxima.begin(), maxima.end(), [&](Index a, Index b) { return spectrum(a) > spectrum(b); });
  if (static_cast<Index>(maxima.size()) > max_peaks) maxima.resize(static_cast<std::size_t>(max_peaks));
  std::sort(maxima.begin(), maxima.end());

  ComponentModel c;
  c.name = name;
  const double spacing = (grid(grid.size() - 1) - grid(0)) / static_cast<double>(grid.size() - 1);
  for (Index i : maxima) {
    const double half = 0.5 * spectrum(i);
    double width_sum = 0.0;
    int sides = 0;
    for (Index l = i; l > 0; --l) {
      if (spectrum(l - 1) < half) {
        const double t = (spectrum(l) - half) / (spectrum(l) - spectrum(l - 1));
        width_sum += grid(i) - (grid(l) - t * (grid(l) - grid(l - 1)));
        ++sides;
        break;
      }
    }
    for (Index r = i; r + 1 < spectrum.size(); ++r) {
      if (spectrum(r + 1) < half) {
        const double t = (spectrum(r) - half) / (spectrum(r) - spectrum(r + 1));
        width_sum += (grid(r) + t * (grid(r + 1) - grid(r))) - grid(i);
        ++sides;
        break;
      }
    }
    Peak p;
    p.position = grid(i);
    p.intensity = std::max(spectrum(i), 0.0);
    p.shape = 0.5;
    p.hwhm = sides > 0 ? std::max(width_sum / sides, kMinHwhm) : std::abs(spacing);
    c.peaks.push_back(p);
  }
  return c;
}

nlohmann::json component_to_json(const ComponentModel& c) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : c.peaks)
    peaks.push_back({{"position", p.position}, {"intensity", p.intensity}, {"shape", p.shape}, {"hwhm", p.hwhm}});
  return {{"name", c.name}, {"peaks", peaks}};
}

ComponentModel component_from_json(const nlohmann::json& j) {
  ComponentModel c;
  try {
    c.name = j.at("name").get<std::string>();
    for (const auto& pj : j.at("peaks")) {
      Peak p;
      p.position = pj.at("position").get<double>();
      p.intensity = pj.at("intensity").get<double>();
      p.shape = pj.at("shape").get<double>();
      p.hwhm = pj.at("hwhm").get<double>();
      c.peaks.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("component model JSON: ") + e.what());
  }
  c.validate();
  return c;
}

HardModel hard_model_from_components(std::vector<ComponentModel> components) {
  HardModel m;
  m.weights.assign(components.size(), 1.0);
  m.components = std::move(components);
  m.validate();
  return m;
}

}  // namespace specsize
