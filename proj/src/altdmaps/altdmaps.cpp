#include "specsize/altdmaps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "specsize/spectra.hpp"

namespace specsize {

Matrix alternating_operator(const Matrix& x1, const Matrix& x2, const KernelParams& params1,
                            const KernelParams& params2) {
  if (x1.rows() != x2.rows())
    throw DataError("alternating diffusion: sensors have different sample counts");
  return markov_kernel(x1, params1) * markov_kernel(x2, params2);
}

AltDmapModel fit_altdmaps(const Matrix& x1, const Matrix& x2, const KernelParams& params1,
                          const KernelParams& params2, Index n_eig, const LlrOptions& llr) {
  const Index n = x1.rows();
  if (n_eig < 2 || n_eig >= n) throw ConfigError("alternating diffusion needs 2 <= n_eig < N");
  const Matrix k_alt = alternating_operator(x1, x2, params1, params2);

  Eigen::EigenSolver<Matrix> solver(k_alt, true);
  if (solver.info() != Eigen::Success)
    throw NumericError("alternating diffusion: eigensolver failed");
  const auto& values = solver.eigenvalues();
  const Eigen::MatrixXcd vectors = solver.eigenvectors();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ma = std::abs(values(a)), mb = std::abs(values(b));
    if (ma != mb) return ma > mb;
    return values(a).real() > values(b).real();
  });

  AltDmapModel model;
  model.params1 = params1;
  model.params2 = params2;
  model.sensor1 = x1;
  model.sensor2 = x2;
  model.eigenvalues.resize(n_eig);
  model.coordinates.resize(n, n_eig);
  for (Index k = 0; k < n_eig; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    const auto lambda = values(src);
    const double mod = std::abs(lambda);
    if (std::abs(lambda.imag()) > kAltImagTolerance * std::max(mod, 1e-300))
      throw NumericError("alternating diffusion: eigenvalue " + std::to_string(k) +
                         " has a non-negligible imaginary part");
    const auto vec = vectors.col(src);
    const double re_norm = vec.real().norm();
    if (!(re_norm > 0.0) || vec.imag().norm() > kAltImagTolerance * re_norm)
      throw NumericError("alternating diffusion: eigenvector " + std::to_string(k) +
                         " is not real");
    model.eigenvalues(k) = lambda.real();
    Vector psi = vec.real() * (std::sqrt(static_cast<double>(n)) / re_norm);
    fix_sign(psi);
    model.coordinates.col(k) = psi;
  }
  if (std::abs(model.eigenvalues(0) - 1.0) > 1e-8)
    throw NumericError("alternating diffusion: leading eigenvalue is not 1");

  // Selection over the nontrivial columns; reported against Psi indices.
  auto sel = local_linear_residual(model.coordinates.rightCols(n_eig - 1), llr);
  model.selection.residuals = Vector::Zero(n_eig);
  model.selection.residuals.tail(n_eig - 1) = sel.residuals;
  for (Index i : sel.indices) model.selection.indices.push_back(i + 1);
  return model;
}

Matrix alt_coordinates(const AltDmapModel& model, const IndexList& indices) {
  for (Index k : indices) {
    if (k < 0 || k >= model.n_eig()) throw ConfigError("AltDMAP index out of range");
  }
  return take_cols(model.coordinates, indices);
}

namespace {

constexpr int kAltFormatVersion = 1;

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> h;
  for (Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void save_altdmap(const AltDmapModel& model, const std::vector<std::string>& sample_ids,
                  const std::filesystem::path& dir) {
  if (static_cast<Index>(sample_ids.size()) != model.n_points())
    throw DataError("AltDMAP manifest: sample id count mismatch");
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "specsize.altdmap";
  j["version"] = kAltFormatVersion;
  j["sensor1"] = {{"epsilon", model.params1.epsilon},
                  {"density_normalize", model.params1.density_normalize},
                  {"dimension", model.sensor1.cols()}};
  j["sensor2"] = {{"epsilon", model.params2.epsilon},
                  {"density_normalize", model.params2.density_normalize},
                  {"dimension", model.sensor2.cols()}};
  j["sample_ids"] = sample_ids;
  j["eigenvalues"] = to_std(model.eigenvalues);
  j["selection"] = {{"indices", model.selection.indices},
                    {"residuals", to_std(model.selection.residuals)}};
  write_text_file(dir / "alt.json", j.dump(2) + "\n");
  save_matrix_csv(model.coordinates, numbered("psi", model.n_eig()), dir / "psi.csv");
  save_matrix_csv(model.sensor1, numbered("s1_", model.sensor1.cols()), dir / "sensor1.csv");
  save_matrix_csv(model.sensor2, numbered("s2_", model.sensor2.cols()), dir / "sensor2.csv");
}

AltDmapModel load_altdmap(const std::filesystem::path& dir, std::vector<std::string>* sample_ids) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir / "alt.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("alt.json: ") + e.what());
  }
  if (j.value("format", "") != "specsize.altdmap" || j.value("version", 0) != kAltFormatVersion)
    throw DataError("alt.json: unsupported format or version");
  AltDmapModel m;
  m.params1 = {j.at("sensor1").at("epsilon").get<double>(),
               j.at("sensor1").at("density_normalize").get<bool>()};
  m.params2 = {j.at("sensor2").at("epsilon").get<double>(),
               j.at("sensor2").at("density_normalize").get<bool>()};
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  m.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<Index>(ev.size()));
  const auto res = j.at("selection").at("residuals").get<std::vector<double>>();
  m.selection.residuals = Eigen::Map<const Vector>(res.data(), static_cast<Index>(res.size()));
  m.selection.indices = j.at("selection").at("indices").get<IndexList>();
  m.coordinates = load_matrix_csv(dir / "psi.csv");
  m.sensor1 = load_matrix_csv(dir / "sensor1.csv");
  m.sensor2 = load_matrix_csv(dir / "sensor2.csv");
  const auto ids = j.at("sample_ids").get<std::vector<std::string>>();
  if (m.coordinates.cols() != m.eigenvalues.size() ||
      m.coordinates.rows() != static_cast<Index>(ids.size()) ||
      m.sensor1.rows() != m.coordinates.rows() || m.sensor2.rows() != m.coordinates.rows())
    throw DataError("AltDMAP model blocks have inconsistent shapes");
  if (sample_ids) *sample_ids = ids;
  return m;
}

}  // namespace specsize
