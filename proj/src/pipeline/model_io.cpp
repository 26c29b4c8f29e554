#include "specsize/pipeline.hpp"

namespace specsize {

namespace {

constexpr int kBundleVersion = 1;

nlohmann::json hard_model_to_json(const HardModel& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components) comps.push_back(component_to_json(c));
  return {{"components", comps}, {"weights", m.weights}, {"offset", m.offset}, {"slope", m.slope}};
}

HardModel hard_model_from_json(const nlohmann::json& j) {
  HardModel m;
  for (const auto& c : j.at("components")) m.components.push_back(component_from_json(c));
  m.weights = j.at("weights").get<std::vector<double>>();
  m.offset = j.at("offset").get<double>();
  m.slope = j.at("slope").get<double>();
  m.validate();
  return m;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

void TrainedPipeline::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json b{{"format", "specsize.pipeline"},
                   {"version", kBundleVersion},
                   {"workflow", workflow},
                   {"pretreatment", pretreatment_to_json(pretreatment)},
                   {"grid", grid.values()}};
  if (dmap) {
    save_dmap(*dmap, dir / "dmap");
    b["coords"] = coords;
  }
  if (head) write_json(dir / "head.json", head->to_json());
  if (alt) {
    save_altdmap(*alt, alt_ids, dir / "alt");
    b["alt_coords"] = alt_coords;
    b["alt_kind"] = alt_kind;
  }
  if (gh) {
    save_dmap(gh->basis, dir / "gh");
    write_json(dir / "gh" / "gh.json", {{"cutoff", gh->cutoff},
                                        {"training_residual", gh->training_residual},
                                        {"coefficients", matrix_to_json(gh->coefficients)}});
  }
  if (alt_head) write_json(dir / "alt_head.json", alt_head->to_json());
  if (yae) write_json(dir / "yshaped.json", yae_to_json(*yae));
  if (x_scale) b["x_scale"] = {{"mean", vector_to_json(x_scale->mean)}, {"sd", vector_to_json(x_scale->sd)}};
  if (pls) write_json(dir / "pls.json", pls_to_json(*pls));
  if (hard_model) {
    write_json(dir / "hard_model.json", hard_model_to_json(*hard_model));
    b["ihm"] = {{"mode", to_string(ihm_mode)},
                {"position_shift", ihm_fit.position_shift},
                {"lambda0", ihm_fit.lambda0},
                {"max_iterations", ihm_fit.max_iterations},
                {"gradient_tolerance", ihm_fit.gradient_tolerance}};
  }
  write_json(dir / "bundle.json", b);
}

TrainedPipeline TrainedPipeline::load(const std::filesystem::path& dir) {
  const nlohmann::json b = read_json(dir / "bundle.json");
  if (b.value("format", "") != "specsize.pipeline" || b.value("version", 0) != kBundleVersion)
    throw DataError("bundle.json: unsupported format or version");
  TrainedPipeline p;
  try {
    p.workflow = b.at("workflow").get<std::string>();
    p.pretreatment = pretreatment_from_json(b.at("pretreatment"));
    p.grid = WavenumberGrid(b.at("grid").get<std::vector<double>>());
    if (b.contains("coords")) {
      p.dmap = load_dmap(dir / "dmap");
      p.coords = b.at("coords").get<IndexList>();
    }
    if (std::filesystem::exists(dir / "head.json")) p.head = Head::from_json(read_json(dir / "head.json"));
    if (b.contains("alt_coords")) {
      p.alt = load_altdmap(dir / "alt", &p.alt_ids);
      p.alt_coords = b.at("alt_coords").get<IndexList>();
      p.alt_kind = b.at("alt_kind").get<std::string>();
    }
    if (std::filesystem::exists(dir / "gh" / "gh.json")) {
      GhModel gh;
      gh.basis = load_dmap(dir / "gh");
      const auto g = read_json(dir / "gh" / "gh.json");
      gh.cutoff = g.at("cutoff").get<double>();
      gh.training_residual = g.at("training_residual").get<double>();
      gh.coefficients = matrix_from_json(g.at("coefficients"));
      p.gh = std::move(gh);
    }
    if (std::filesystem::exists(dir / "alt_head.json"))
      p.alt_head = Head::from_json(read_json(dir / "alt_head.json"));
    if (std::filesystem::exists(dir / "yshaped.json")) p.yae = yae_from_json(read_json(dir / "yshaped.json"));
    if (b.contains("x_scale"))
      p.x_scale = ColumnScaler{vector_from_json(b.at("x_scale").at("mean")), vector_from_json(b.at("x_scale").at("sd"))};
    if (std::filesystem::exists(dir / "pls.json")) p.pls = pls_from_json(read_json(dir / "pls.json"));
    if (b.contains("ihm")) {
      p.hard_model = hard_model_from_json(read_json(dir / "hard_model.json"));
      const auto& h = b.at("ihm");
      p.ihm_mode = parse_fit_mode(h.at("mode").get<std::string>());
      p.ihm_fit.position_shift = h.at("position_shift").get<double>();
      p.ihm_fit.lambda0 = h.at("lambda0").get<double>();
      p.ihm_fit.max_iterations = h.at("max_iterations").get<Index>();
      p.ihm_fit.gradient_tolerance = h.at("gradient_tolerance").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model bundle: ") + e.what());
  }
  return p;
}

}  // namespace specsize
