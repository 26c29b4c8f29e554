#include <json.hpp>

#include "specsize/dmaps.hpp"
#include "specsize/spectra.hpp"

namespace specsize {

namespace {

constexpr int kDmapFormatVersion = 1;

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> h;
  for (Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

}  // namespace

void save_dmap(const DmapModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "specsize.dmap";
  j["version"] = kDmapFormatVersion;
  j["epsilon"] = model.params.epsilon;
  j["density_normalize"] = model.params.density_normalize;
  j["n_points"] = model.n_points();
  j["dimension"] = model.ref_points.cols();
  j["eigenvalues"] = std::vector<double>(model.eigenvalues.data(),
                                         model.eigenvalues.data() + model.eigenvalues.size());
  write_text_file(dir / "dmap.json", j.dump(2) + "\n");
  save_matrix_csv(model.ref_points, numbered("x", model.ref_points.cols()), dir / "ref_points.csv");
  save_matrix_csv(model.eigenvectors, numbered("phi", model.eigenvectors.cols()),
                  dir / "eigenvectors.csv");
  Matrix sums(model.n_points(), 2);
  sums.col(0) = model.p_row_sums;
  sums.col(1) = model.d_row_sums;
  save_matrix_csv(sums, {"p", "d"}, dir / "row_sums.csv");
}

DmapModel load_dmap(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir / "dmap.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dmap.json: ") + e.what());
  }
  if (j.value("format", "") != "specsize.dmap" || j.value("version", 0) != kDmapFormatVersion)
    throw DataError("dmap.json: unsupported format or version");
  DmapModel m;
  m.params.epsilon = j.at("epsilon").get<double>();
  m.params.density_normalize = j.at("density_normalize").get<bool>();
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  m.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<Index>(ev.size()));
  m.ref_points = load_matrix_csv(dir / "ref_points.csv");
  m.eigenvectors = load_matrix_csv(dir / "eigenvectors.csv");
  const Matrix sums = load_matrix_csv(dir / "row_sums.csv");
  if (m.ref_points.rows() != j.at("n_points").get<Index>() ||
      m.ref_points.cols() != j.at("dimension").get<Index>() ||
      m.eigenvectors.rows() != m.ref_points.rows() || m.eigenvectors.cols() != m.eigenvalues.size() ||
      sums.rows() != m.ref_points.rows() || sums.cols() != 2)
    throw DataError("dmap model blocks have inconsistent shapes");
  m.p_row_sums = sums.col(0);
  m.d_row_sums = sums.col(1);
  return m;
}

}  // namespace specsize
