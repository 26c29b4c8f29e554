#include "specsize/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace specsize {

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "arc_manifold") return SynthKind::arc_manifold;
  if (name == "two_sensor_common") return SynthKind::two_sensor_common;
  if (name == "peak_spectra") return SynthKind::peak_spectra;
  throw ConfigError("unknown synth kind: " + name);
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::arc_manifold: return "arc_manifold";
    case SynthKind::two_sensor_common: return "two_sensor_common";
    case SynthKind::peak_spectra: return "peak_spectra";
  }
  return "peak_spectra";
}

void SynthSpec::validate() const {
  if (n_samples < 10) throw ConfigError("synth: n_samples must be >= 10");
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
  if (!(size_min > 0.0 && size_min < size_max)) throw ConfigError("synth: need 0 < size_min < size_max");
  if (dim < 2) throw ConfigError("synth: dim must be >= 2");
  if (!(angle > 0.0)) throw ConfigError("synth: angle must be positive");
  if (!(span >= 0.0)) throw ConfigError("synth: span must be >= 0");
  if (n_peaks < 1) throw ConfigError("synth: n_peaks must be >= 1");
  if (!(coupling >= 0.0 && coupling <= 1.0)) throw ConfigError("synth: coupling must be in [0, 1]");
  if (!(nuisance >= 0.0 && nuisance < 1.0)) throw ConfigError("synth: nuisance must be in [0, 1)");
  if (!(grid_lo < grid_hi) || grid_points < 10) throw ConfigError("synth: invalid grid");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"kind", to_string(kind)}, {"n_samples", n_samples}, {"noise", noise},
          {"seed", seed},            {"size_min", size_min},   {"size_max", size_max},
          {"dim", dim},              {"angle", angle},         {"span", span},
          {"n_peaks", n_peaks},      {"coupling", coupling},   {"linear", linear},
          {"nuisance", nuisance},    {"grid_lo", grid_lo},     {"grid_hi", grid_hi},
          {"grid_points", grid_points}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    if (j.contains("kind")) s.kind = parse_synth_kind(j.at("kind").get<std::string>());
    s.n_samples = j.value("n_samples", s.n_samples);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
    s.size_min = j.value("size_min", s.size_min);
    s.size_max = j.value("size_max", s.size_max);
    s.dim = j.value("dim", s.dim);
    s.angle = j.value("angle", s.angle);
    s.span = j.value("span", s.span);
    s.n_peaks = j.value("n_peaks", s.n_peaks);
    s.coupling = j.value("coupling", s.coupling);
    s.linear = j.value("linear", s.linear);
    s.nuisance = j.value("nuisance", s.nuisance);
    s.grid_lo = j.value("grid_lo", s.grid_lo);
    s.grid_hi = j.value("grid_hi", s.grid_hi);
    s.grid_points = j.value("grid_points", s.grid_points);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

std::vector<std::string> sample_ids(Index n) {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%04lld", static_cast<long long>(i + 1));
    ids.emplace_back(buf);
  }
  return ids;
}

WavenumberGrid index_grid(Index d) {
  std::vector<double> g;
  for (Index c = 0; c < d; ++c) g.push_back(static_cast<double>(c + 1));
  return WavenumberGrid(std::move(g));
}

nlohmann::json to_list(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

SynthData make_arc(const SynthSpec& s, Rng& rng) {
  const Index n = s.n_samples, d = s.dim;
  Matrix frame(d, 2);
  for (Index i = 0; i < frame.size(); ++i) frame(i) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(frame).householderQ() * Matrix::Identity(d, 2);
  Matrix x(n, d);
  Vector t(n), size(n);
  for (Index i = 0; i < n; ++i) {
    t(i) = rng.uniform(0.0, s.angle);
    x.row(i) = (q * Eigen::Vector2d(std::cos(t(i)), std::sin(t(i)))).transpose();
    for (Index c = 0; c < d; ++c) x(i, c) += s.noise * rng.normal();
    size(i) = s.size_min + (s.size_max - s.size_min) * t(i) / s.angle;
  }
  SynthData out{SpectraSet(index_grid(d), x, sample_ids(n), size), {}, {}};
  out.truth["hidden"] = {{"arclength", to_list(t)}};
  return out;
}

SynthData make_two_sensor(const SynthSpec& s, Rng& rng) {
  const Index n = s.n_samples;
  Matrix x1(n, 3), x2(n, 3);
  Vector theta(n), a(n), b(n), size(n);
  for (Index i = 0; i < n; ++i) {
    theta(i) = rng.uniform(0.0, 2.0 * std::numbers::pi);
    a(i) = rng.uniform(0.0, s.span);
    b(i) = rng.uniform(0.0, s.span);
    x1.row(i) << std::cos(theta(i)), std::sin(theta(i)), a(i);
    x2.row(i) << std::cos(theta(i)), std::sin(theta(i)), b(i);
    for (Index c = 0; c < 3; ++c) {
      x1(i, c) += s.noise * rng.normal();
      x2(i, c) += s.noise * rng.normal();
    }
    size(i) = s.size_min + 0.5 * (s.size_max - s.size_min) * (1.0 + std::cos(theta(i)));
  }
  SynthData out{SpectraSet(index_grid(3), x1, sample_ids(n), size), {}, x2};
  out.truth["hidden"] = {{"theta", to_list(theta)}, {"nuisance1", to_list(a)}, {"nuisance2", to_list(b)}};
  return out;
}

SynthData make_peaks(const SynthSpec& s, Rng& rng) {
  const Index n = s.n_samples;
  const Vector grid = Vector::LinSpaced(s.grid_points, s.grid_lo, s.grid_hi);
  const double width = s.grid_hi - s.grid_lo;

  ComponentModel base{"synthetic", {}};
  Vector gain(s.n_peaks);
  const double slot = 0.9 * width / static_cast<double>(s.n_peaks);
  for (Index k = 0; k < s.n_peaks; ++k) {
    Peak p;
    p.position = s.grid_lo + 0.05 * width + slot * (static_cast<double>(k) + 0.5) +
                 rng.uniform(-0.2, 0.2) * slot;
    p.intensity = rng.uniform(0.3, 1.0);
    p.shape = rng.uniform(0.2, 0.8);
    p.hwhm = rng.uniform(0.05, 0.15) * slot;
    base.peaks.push_back(p);
    gain(k) = rng.uniform(-1.0, 1.0);
  }

  Matrix x(n, grid.size());
  Vector size(n), z(n), conc(n);
  for (Index i = 0; i < n; ++i) {
    z(i) = rng.uniform();
    size(i) = s.size_min + (s.size_max - s.size_min) * z(i);
    conc(i) = 1.0 + s.nuisance * rng.uniform(-1.0, 1.0);
    HardModel m = hard_model_from_components({base});
    for (Index k = 0; k < s.n_peaks; ++k) {
      Peak& p = m.components[0].peaks[static_cast<std::size_t>(k)];
      p.intensity *= 1.0 + s.coupling * gain(k) * (z(i) - 0.5);
      if (!s.linear) p.hwhm *= 1.0 + 0.5 * s.coupling * z(i);
    }
    m.weights[0] = conc(i);
    m.offset = 0.05 * s.coupling * z(i);
    m.slope = 0.0;
    x.row(i) = hard_model_eval(m, grid).transpose();
    for (Index c = 0; c < x.cols(); ++c) x(i, c) += s.noise * rng.normal();
  }
  std::vector<double> g(grid.data(), grid.data() + grid.size());
  SynthData out{SpectraSet(WavenumberGrid(std::move(g)), x, sample_ids(n), size), {}, {}};
  out.truth["hidden"] = {{"z", to_list(z)}, {"concentration", to_list(conc)}};
  out.truth["components"] = nlohmann::json::array({component_to_json(base)});
  out.truth["peak_gain"] = to_list(gain);
  return out;
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthData out = [&] {
    switch (spec.kind) {
      case SynthKind::arc_manifold: return make_arc(spec, rng);
      case SynthKind::two_sensor_common: return make_two_sensor(spec, rng);
      case SynthKind::peak_spectra: break;
    }
    return make_peaks(spec, rng);
  }();
  out.truth["spec"] = spec.to_json();
  return out;
}

}  // namespace specsize
