#include <cmath>
#include <limits>
#include <sstream>

#include "specsize/pipeline.hpp"

namespace specsize {

namespace {

constexpr int kReportVersion = 1;

Metrics metrics_from_json(const nlohmann::json& j, const std::vector<std::string>& ids) {
  Metrics m;
  m.r2 = j.at("r2").is_null() ? -std::numeric_limits<double>::infinity() : j.at("r2").get<double>();
  m.rmse = j.at("rmse_nm").get<double>();
  m.mape = j.at("mape_pct").get<double>();
  m.percent_errors.resize(static_cast<Index>(ids.size()));
  const auto& pe = j.at("percent_errors");
  for (std::size_t i = 0; i < ids.size(); ++i) m.percent_errors(static_cast<Index>(i)) = pe.at(ids[i]).get<double>();
  return m;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

nlohmann::json RunReport::to_json() const {
  nlohmann::json parity_json = nlohmann::json::array();
  for (const auto& p : parity)
    parity_json.push_back({{"sample_id", p.sample_id}, {"actual_nm", p.actual}, {"predicted_nm", p.predicted},
                           {"split", p.split}});
  return {{"format", "specsize.report"},
          {"version", kReportVersion},
          {"workflow", workflow},
          {"config_hash", config_hash},
          {"config", config},
          {"latent_count", latent_count},
          {"metrics", {{"train", metrics_to_json(train, train_ids)}, {"test", metrics_to_json(test, test_ids)}}},
          {"diagnostics", diagnostics},
          {"split",
           {{"train_indices", train_indices},
            {"test_indices", test_indices},
            {"train_ids", train_ids},
            {"test_ids", test_ids}}},
          {"cluster_labels", cluster_labels},
          {"parity", parity_json}};
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "specsize.report" || j.value("version", 0) != kReportVersion)
    throw DataError("report: unsupported format or version");
  RunReport r;
  try {
    r.workflow = j.at("workflow").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.latent_count = j.at("latent_count").get<Index>();
    const auto& split = j.at("split");
    r.train_indices = split.at("train_indices").get<IndexList>();
    r.test_indices = split.at("test_indices").get<IndexList>();
    r.train_ids = split.at("train_ids").get<std::vector<std::string>>();
    r.test_ids = split.at("test_ids").get<std::vector<std::string>>();
    r.train = metrics_from_json(j.at("metrics").at("train"), r.train_ids);
    r.test = metrics_from_json(j.at("metrics").at("test"), r.test_ids);
    r.diagnostics = j.at("diagnostics");
    r.cluster_labels = j.at("cluster_labels").get<std::vector<int>>();
    for (const auto& p : j.at("parity"))
      r.parity.push_back({p.at("sample_id").get<std::string>(), p.at("actual_nm").get<double>(),
                          p.at("predicted_nm").get<double>(), p.at("split").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  return r;
}

std::string parity_csv(const RunReport& report) {
  std::ostringstream os;
  os << "sample_id,actual_nm,predicted_nm,split\n";
  for (const auto& p : report.parity)
    os << csv_field(p.sample_id) << ',' << format_double(p.actual) << ',' << format_double(p.predicted) << ','
       << p.split << '\n';
  return os.str();
}

std::string metrics_csv(const RunReport& report) {
  std::ostringstream os;
  os << "split,n,r2,rmse_nm,mape_pct\n";
  const auto row = [&](const char* name, const Metrics& m, std::size_t count) {
    os << name << ',' << count << ',' << (std::isfinite(m.r2) ? format_double(m.r2) : std::string("-inf")) << ','
       << format_double(m.rmse) << ',' << format_double(m.mape) << '\n';
  };
  row("train", report.train, report.train_ids.size());
  row("test", report.test, report.test_ids.size());
  return os.str();
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  if (report.train_ids.empty() || report.test_ids.empty())
    throw DataError("report needs both a train and a test split");
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_file(dir / "metrics.csv", metrics_csv(report));
  write_text_file(dir / "parity.csv", parity_csv(report));
  if (!report.loss_history_csv.empty()) write_text_file(dir / "loss_history.csv", report.loss_history_csv);
  if (!report.search_csv.empty()) write_text_file(dir / "search.csv", report.search_csv);
}

std::vector<int> kmeans2(const Matrix& x) {
  const Index n = x.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (n < 2) return labels;
  const Eigen::RowVectorXd centroid = x.colwise().mean();
  Index a = 0, b = 0;
  (x.rowwise() - centroid).rowwise().squaredNorm().maxCoeff(&a);
  (x.rowwise() - x.row(a)).rowwise().squaredNorm().maxCoeff(&b);
  if (a == b) return labels;
  Matrix centers(2, x.cols());
  centers.row(0) = x.row(a);
  centers.row(1) = x.row(b);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const int l = (x.row(i) - centers.row(0)).squaredNorm() <= (x.row(i) - centers.row(1)).squaredNorm() ? 0 : 1;
      changed = changed || l != labels[static_cast<std::size_t>(i)];
      labels[static_cast<std::size_t>(i)] = l;
    }
    if (!changed && iter > 0) break;
    for (int c = 0; c < 2; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
      Index count = 0;
      for (Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != c) continue;
        sum += x.row(i);
        ++count;
      }
      if (count > 0) centers.row(c) = sum / static_cast<double>(count);
    }
  }
  if (labels[0] != 0)
    for (int& l : labels) l = 1 - l;
  return labels;
}

}  // namespace specsize
