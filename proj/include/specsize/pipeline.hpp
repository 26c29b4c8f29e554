#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specsize/altdmaps.hpp"
#include "specsize/conformal.hpp"
#include "specsize/dmaps.hpp"
#include "specsize/ihm.hpp"
#include "specsize/metrics.hpp"
#include "specsize/pretreat.hpp"
#include "specsize/regressors.hpp"
#include "specsize/synth.hpp"

namespace specsize {

// ---------------------------------------------------------------------------
// Configuration

inline const std::vector<std::string> kWorkflows{"direct_dmaps_nn", "direct_dmaps_gbt", "altdmaps",
                                                 "yshaped",         "pls_direct",       "ihm_pls"};

nlohmann::json pretreatment_to_json(const PretreatmentSpec& spec);
PretreatmentSpec pretreatment_from_json(const nlohmann::json& j);

struct DataSource {
  std::optional<SynthSpec> synth;
  std::filesystem::path spectra;
  std::filesystem::path sizes;
  std::filesystem::path sensor2;  // optional matrix CSV aligned with the spectra rows
};

struct SplitSpec {
  double test_fraction = 0.2;
  Index n_test = 0;  // overrides test_fraction when > 0
  std::uint64_t seed = 0;
};

struct DmapsConfig {
  std::optional<double> epsilon;  // median heuristic times epsilon_scale when absent
  double epsilon_scale = 1.0;
  bool density_normalize = true;
  Index n_coords = 6;
  bool select = false;  // keep only coordinates the local linear test marks as new
  Index n_candidates = 20;
};

struct AltConfig {
  std::string alt_regressor = "gh";  // gh | gbt
  std::string size_regressor = "nn";  // nn | gbt
  Index n_eig = 10;
  Index max_coords = 2;
  double epsilon_scale = 1.0;
  double gh_epsilon_scale = 1.0;
  double gh_cutoff = 1e-3;
  bool actual_alt_diagnostic = false;
};

struct PlsConfig {
  Index k_max = 10;
  Index folds = 5;
};

struct IhmConfig {
  FitMode mode = FitMode::medium;
  std::vector<ComponentModel> components;  // seeded from the mean training spectrum when empty
  Index seed_peaks = 8;
  FitOptions fit;
};

struct ExperimentConfig {
  std::string workflow;
  std::uint64_t seed = 0;
  DataSource data;
  SplitSpec split;
  PretreatmentSpec pretreatment;
  DmapsConfig dmaps;
  MlpSpec mlp;
  GbtSpec gbt;
  YShapedSpec yshaped;
  PlsConfig pls;
  AltConfig alt;
  IhmConfig ihm;
  std::optional<SearchSpec> search;
  nlohmann::json canonical;  // input JSON with the seed override applied

  /// Relative paths resolve against `base_dir`. Sub-specs without their own
  /// seed inherit the top-level one.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    std::optional<std::uint64_t> seed_override = std::nullopt,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path,
                               std::optional<std::uint64_t> seed_override = std::nullopt);
  /// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

struct LoadedData {
  SpectraSet set;
  Matrix sensor2;  // empty unless provided
  nlohmann::json truth;  // synthetic truth sidecar, null for file data
};
LoadedData load_experiment_data(const ExperimentConfig& config);

std::string fnv1a_hex(const std::string& text);

// ---------------------------------------------------------------------------
// Trained models

/// Size (or coordinate) regressor: feed-forward network or boosted trees.
struct Head {
  std::string kind;  // nn | gbt
  MlpModel mlp;
  std::vector<GbtModel> gbt;

  Matrix predict(const Matrix& x) const;
  nlohmann::json to_json() const;
  static Head from_json(const nlohmann::json& j);
};

struct TrainedPipeline {
  std::string workflow;
  PretreatmentSpec pretreatment;
  WavenumberGrid grid;  // after pretreatment

  std::optional<DmapModel> dmap;
  IndexList coords;
  std::optional<Head> head;

  std::optional<AltDmapModel> alt;
  std::vector<std::string> alt_ids;
  IndexList alt_coords;
  std::string alt_kind;
  std::optional<GhModel> gh;
  std::optional<Head> alt_head;

  std::optional<YShapedModel> yae;

  std::optional<ColumnScaler> x_scale;
  std::optional<PlsModel> pls;

  std::optional<HardModel> hard_model;
  FitMode ihm_mode = FitMode::medium;
  FitOptions ihm_fit;

  /// Predicted sizes for already pretreated spectra on `grid`.
  Vector predict_pretreated(const Matrix& x) const;
  /// Pretreats, checks the grid, predicts.
  Vector predict(const SpectraSet& raw) const;

  void save(const std::filesystem::path& dir) const;
  static TrainedPipeline load(const std::filesystem::path& dir);
};

// ---------------------------------------------------------------------------
// Runs and reports

struct ParityRow {
  std::string sample_id;
  double actual = 0.0;
  double predicted = 0.0;
  std::string split;  // train | test
};

struct RunReport {
  std::string workflow;
  std::string config_hash;
  nlohmann::json config;
  Metrics train;
  Metrics test;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  IndexList train_indices;
  IndexList test_indices;
  Index latent_count = 0;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<int> cluster_labels;  // k = 2 on the raw spectra, one per sample
  std::vector<ParityRow> parity;    // every sample in input order
  std::string loss_history_csv;     // empty when not applicable
  std::string search_csv;           // empty unless a search ran

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
};

struct RunOutput {
  RunReport report;
  TrainedPipeline model;
};

RunOutput run_workflow(const ExperimentConfig& config);
RunOutput run_workflow(const ExperimentConfig& config, const LoadedData& data);

/// report.json, metrics.csv, parity.csv, plus loss_history.csv and
/// search.csv when present.
void emit_report(const RunReport& report, const std::filesystem::path& dir);
std::string parity_csv(const RunReport& report);
std::string metrics_csv(const RunReport& report);

/// Two-cluster Lloyd iteration seeded with the point farthest from the
/// centroid and the point farthest from that one. Labels are renumbered so
/// sample 0 has label 0.
std::vector<int> kmeans2(const Matrix& x);

/// DMAP coordinates used as inputs for the dmap-based workflows.
struct DmapFeatures {
  DmapModel model;
  IndexList coords;
  Matrix train;
};
DmapFeatures fit_dmap_features(const Matrix& x_train, const DmapsConfig& cfg);

/// Offline AltDMAPs: sensor 1 = the given coordinates, sensor 2 = `second`.
AltDmapModel fit_alt_offline(const Matrix& sensor1, const Matrix& second, const AltConfig& cfg);
IndexList alt_selected_coords(const AltDmapModel& alt, Index max_coords);

}  // namespace specsize
