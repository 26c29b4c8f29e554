#include <cstdio>

#include "specsize/pipeline.hpp"

namespace specsize {

namespace {

template <typename Enum>
struct Names {
  Enum value;
  const char* name;
};

constexpr Names<Baseline> kBaselines[] = {
    {Baseline::none, "none"}, {Baseline::linear_fit, "linear_fit"}, {Baseline::rubber_band, "rubber_band"}};
constexpr Names<Normalization> kNorms[] = {
    {Normalization::none, "none"}, {Normalization::snv, "snv"}, {Normalization::minmax, "minmax"}};
constexpr Names<RegionKind> kRegions[] = {
    {RegionKind::global, "global"}, {RegionKind::fingerprint, "fingerprint"}, {RegionKind::custom, "custom"}};

template <typename Enum, std::size_t N>
Enum lookup(const Names<Enum> (&table)[N], const std::string& name, const char* what) {
  for (const auto& e : table)
    if (name == e.name) return e.value;
  throw ConfigError(std::string("unknown ") + what + ": " + name);
}

template <typename Enum, std::size_t N>
const char* name_of(const Names<Enum> (&table)[N], Enum value) {
  for (const auto& e : table)
    if (e.value == value) return e.name;
  return "none";
}

Interval interval_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("interval must be [lo, hi]");
  const Interval iv{j[0].get<double>(), j[1].get<double>()};
  if (!(iv.lo < iv.hi)) throw ConfigError("interval needs lo < hi");
  return iv;
}

// Sub-specs inherit the top-level seed unless they set their own.
nlohmann::json with_seed(const nlohmann::json& section, std::uint64_t seed) {
  nlohmann::json j = section.is_null() ? nlohmann::json::object() : section;
  if (!j.contains("seed")) j["seed"] = seed;
  return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

nlohmann::json pretreatment_to_json(const PretreatmentSpec& spec) {
  nlohmann::json j{{"region", name_of(kRegions, spec.region)},
                   {"baseline", name_of(kBaselines, spec.baseline)},
                   {"normalization", name_of(kNorms, spec.normalization)}};
  if (spec.region == RegionKind::custom) j["custom"] = {spec.custom.lo, spec.custom.hi};
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& iv : spec.exclusions) ex.push_back({iv.lo, iv.hi});
  j["exclusions"] = ex;
  return j;
}

PretreatmentSpec pretreatment_from_json(const nlohmann::json& j) {
  PretreatmentSpec s;
  if (j.is_null()) return s;
  try {
    if (j.contains("region")) s.region = lookup(kRegions, j.at("region").get<std::string>(), "region");
    if (j.contains("baseline")) s.baseline = lookup(kBaselines, j.at("baseline").get<std::string>(), "baseline");
    if (j.contains("normalization"))
      s.normalization = lookup(kNorms, j.at("normalization").get<std::string>(), "normalization");
    if (s.region == RegionKind::custom) {
      if (!j.contains("custom")) throw ConfigError("custom region needs \"custom\": [lo, hi]");
      s.custom = interval_from_json(j.at("custom"));
    }
    if (j.contains("exclusions"))
      for (const auto& iv : j.at("exclusions")) s.exclusions.push_back(interval_from_json(iv));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pretreatment: ") + e.what());
  }
  return s;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& input,
                                             std::optional<std::uint64_t> seed_override,
                                             const std::filesystem::path& base_dir) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.canonical = input;
  if (seed_override) c.canonical["seed"] = *seed_override;
  const auto& j = c.canonical;
  try {
    c.workflow = j.value("workflow", std::string());
    if (std::find(kWorkflows.begin(), kWorkflows.end(), c.workflow) == kWorkflows.end())
      throw ConfigError("config needs exactly one workflow out of direct_dmaps_nn, direct_dmaps_gbt, "
                        "altdmaps, yshaped, pls_direct, ihm_pls (got '" + c.workflow + "')");
    c.seed = j.value("seed", std::uint64_t{0});

    const auto& data = j.value("data", nlohmann::json::object());
    if (data.contains("synth")) {
      c.data.synth = SynthSpec::from_json(with_seed(data.at("synth"), c.seed));
      if (data.contains("spectra")) throw ConfigError("data: give either synth or spectra, not both");
    } else {
      if (!data.contains("spectra")) throw ConfigError("data needs \"spectra\" or \"synth\"");
      c.data.spectra = resolve(base_dir, data.at("spectra").get<std::string>());
      if (data.contains("sizes")) c.data.sizes = resolve(base_dir, data.at("sizes").get<std::string>());
    }
    if (data.contains("sensor2")) c.data.sensor2 = resolve(base_dir, data.at("sensor2").get<std::string>());

    const auto& split = j.value("split", nlohmann::json::object());
    c.split.test_fraction = split.value("test_fraction", c.split.test_fraction);
    c.split.n_test = split.value("n_test", c.split.n_test);
    c.split.seed = split.value("seed", c.seed);
    if (!(c.split.test_fraction > 0.0 && c.split.test_fraction < 1.0) && c.split.n_test <= 0)
      throw ConfigError("split: test_fraction must be in (0, 1)");

    c.pretreatment = pretreatment_from_json(j.value("pretreatment", nlohmann::json()));

    const auto& d = j.value("dmaps", nlohmann::json::object());
    if (d.contains("epsilon") && !d.at("epsilon").is_null()) c.dmaps.epsilon = d.at("epsilon").get<double>();
    c.dmaps.epsilon_scale = d.value("epsilon_scale", c.dmaps.epsilon_scale);
    c.dmaps.density_normalize = d.value("density_normalize", c.dmaps.density_normalize);
    c.dmaps.n_coords = d.value("n_coords", c.dmaps.n_coords);
    c.dmaps.select = d.value("select", c.dmaps.select);
    c.dmaps.n_candidates = d.value("n_candidates", c.dmaps.n_candidates);
    if (c.dmaps.n_coords < 1) throw ConfigError("dmaps: n_coords must be >= 1");
    if (c.dmaps.epsilon && !(*c.dmaps.epsilon > 0.0)) throw ConfigError("dmaps: epsilon must be positive");
    if (!(c.dmaps.epsilon_scale > 0.0)) throw ConfigError("dmaps: epsilon_scale must be positive");

    c.mlp = MlpSpec::from_json(with_seed(j.value("mlp", nlohmann::json()), c.seed));
    c.gbt = GbtSpec::from_json(with_seed(j.value("gbt", nlohmann::json()), c.seed));
    c.yshaped = YShapedSpec::from_json(with_seed(j.value("yshaped", nlohmann::json()), c.seed));

    const auto& p = j.value("pls", nlohmann::json::object());
    c.pls.k_max = p.value("k_max", c.pls.k_max);
    c.pls.folds = p.value("folds", c.pls.folds);
    if (c.pls.k_max < 1 || c.pls.folds < 2) throw ConfigError("pls: need k_max >= 1 and folds >= 2");

    const auto& a = j.value("altdmaps", nlohmann::json::object());
    c.alt.alt_regressor = a.value("alt_regressor", c.alt.alt_regressor);
    c.alt.size_regressor = a.value("size_regressor", c.alt.size_regressor);
    c.alt.n_eig = a.value("n_eig", c.alt.n_eig);
    c.alt.max_coords = a.value("max_coords", c.alt.max_coords);
    c.alt.epsilon_scale = a.value("epsilon_scale", c.alt.epsilon_scale);
    c.alt.gh_epsilon_scale = a.value("gh_epsilon_scale", c.alt.gh_epsilon_scale);
    c.alt.gh_cutoff = a.value("gh_cutoff", c.alt.gh_cutoff);
    c.alt.actual_alt_diagnostic = a.value("actual_alt_diagnostic", c.alt.actual_alt_diagnostic);
    if (c.alt.alt_regressor != "gh" && c.alt.alt_regressor != "gbt")
      throw ConfigError("altdmaps: alt_regressor must be gh or gbt");
    if (c.alt.size_regressor != "nn" && c.alt.size_regressor != "gbt")
      throw ConfigError("altdmaps: size_regressor must be nn or gbt");
    if (c.alt.n_eig < 2 || c.alt.max_coords < 1) throw ConfigError("altdmaps: need n_eig >= 2, max_coords >= 1");

    const auto& h = j.value("ihm", nlohmann::json::object());
    if (h.contains("mode")) c.ihm.mode = parse_fit_mode(h.at("mode").get<std::string>());
    if (h.contains("components")) {
      for (const auto& comp : h.at("components")) {
        if (comp.is_string()) {
          const auto path = resolve(base_dir, comp.get<std::string>());
          c.ihm.components.push_back(component_from_json(nlohmann::json::parse(read_text_file(path))));
        } else {
          c.ihm.components.push_back(component_from_json(comp));
        }
      }
    }
    c.ihm.seed_peaks = h.value("seed_peaks", c.ihm.seed_peaks);
    c.ihm.fit.position_shift = h.value("position_shift", c.ihm.fit.position_shift);
    c.ihm.fit.max_iterations = h.value("max_iterations", c.ihm.fit.max_iterations);

    if (j.contains("search")) c.search = SearchSpec::from_json(with_seed(j.at("search"), c.seed));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return from_json(j, seed_override, path.parent_path());
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical.dump()); }

LoadedData load_experiment_data(const ExperimentConfig& config) {
  if (config.data.synth) {
    auto synth = synth_generate(*config.data.synth);
    LoadedData out{std::move(synth.set), std::move(synth.sensor2), std::move(synth.truth)};
    if (!config.data.sensor2.empty()) out.sensor2 = load_matrix_csv(config.data.sensor2);
    return out;
  }
  std::optional<std::filesystem::path> sizes;
  if (!config.data.sizes.empty()) sizes = config.data.sizes;
  LoadedData out{load_spectra(config.data.spectra, sizes), Matrix(), nullptr};
  if (!config.data.sensor2.empty()) {
    out.sensor2 = load_matrix_csv(config.data.sensor2);
    if (out.sensor2.rows() != out.set.n_samples())
      throw DataError("sensor2 rows do not match the number of spectra");
  }
  return out;
}

}  // namespace specsize
