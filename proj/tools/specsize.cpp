// specsize: command-line runner for the size-from-spectra workflows.

#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "specsize/pipeline.hpp"

using namespace specsize;
namespace fs = std::filesystem;

namespace {

std::optional<std::uint64_t> seed_option(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

IndexList parse_index_list(const std::string& text) {
  IndexList out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ConfigError("bad index list: " + text);
    }
  }
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, const IndexList& idx) {
  std::vector<std::string> h;
  for (Index k : idx) h.push_back(prefix + std::to_string(k));
  return h;
}

void write_ids_matrix(const fs::path& path, const std::vector<std::string>& ids, const Matrix& m,
                      const std::vector<std::string>& header) {
  std::ostringstream os;
  os << "sample_id";
  for (const auto& h : header) os << ',' << h;
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    os << ids[static_cast<std::size_t>(i)];
    for (Index c = 0; c < m.cols(); ++c) os << ',' << format_double(m(i, c));
    os << '\n';
  }
  write_text_file(path, os.str());
}

void print_metrics(const char* name, const Metrics& m, std::size_t n) {
  std::printf("%-5s n=%-4zu R2=%.4f  RMSE=%.3f nm  MAPE=%.3f %%\n", name, n, m.r2, m.rmse, m.mape);
}

// -- subcommands -------------------------------------------------------------

void cmd_synth(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  nlohmann::json j = read_json(config);
  if (j.contains("data") && j["data"].contains("synth")) j = j["data"]["synth"];
  else if (j.contains("synth")) j = j["synth"];
  if (seed) j["seed"] = *seed;
  const SynthData data = synth_generate(SynthSpec::from_json(j));
  fs::create_directories(out);
  save_spectra(data.set, out / "spectra.csv");
  save_sizes(data.set, out / "sizes.csv");
  write_text_file(out / "truth.json", data.truth.dump(2) + "\n");
  if (data.sensor2.size() > 0) {
    std::vector<std::string> header;
    for (Index c = 0; c < data.sensor2.cols(); ++c) header.push_back("s2_" + std::to_string(c + 1));
    save_matrix_csv(data.sensor2, header, out / "sensor2.csv");
  }
  std::printf("wrote %lld samples to %s\n", static_cast<long long>(data.set.n_samples()), out.c_str());
}

void cmd_preprocess(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  const auto cfg = ExperimentConfig::load(config, seed);
  const auto data = load_experiment_data(cfg);
  const SpectraSet treated = pretreat(data.set, cfg.pretreatment);
  fs::create_directories(out);
  save_spectra(treated, out / "spectra.csv");
  if (treated.has_sizes()) save_sizes(treated, out / "sizes.csv");
  std::printf("pretreated %lld spectra, %lld wavenumbers kept\n", static_cast<long long>(treated.n_samples()),
              static_cast<long long>(treated.n_wavenumbers()));
}

void cmd_dmap_fit(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  const auto cfg = ExperimentConfig::load(config, seed);
  const auto data = load_experiment_data(cfg);
  const SpectraSet treated = pretreat(data.set, cfg.pretreatment);
  const DmapFeatures f = fit_dmap_features(treated.intensities(), cfg.dmaps);
  save_dmap(f.model, out / "dmap");
  write_text_file(out / "pretreatment.json", pretreatment_to_json(cfg.pretreatment).dump(2) + "\n");
  write_ids_matrix(out / "coordinates.csv", treated.sample_ids(), f.train, numbered("phi", f.coords));
  std::printf("epsilon %.6g, coordinates:", f.model.params.epsilon);
  for (Index k : f.coords) std::printf(" %lld", static_cast<long long>(k));
  std::printf("\n");
}

void cmd_dmap_extend(const fs::path& model_dir, const fs::path& spectra, const std::string& coords,
                     const fs::path& out) {
  const DmapModel model = load_dmap(model_dir / "dmap");
  PretreatmentSpec pre;
  if (fs::exists(model_dir / "pretreatment.json")) pre = pretreatment_from_json(read_json(model_dir / "pretreatment.json"));
  const SpectraSet treated = pretreat(load_spectra(spectra), pre);
  IndexList idx = coords.empty() ? IndexList{} : parse_index_list(coords);
  if (idx.empty())
    for (Index k = 1; k < extendable_count(model); ++k) idx.push_back(k);
  const Matrix phi = nystrom_extend(model, treated.intensities(), idx);
  write_ids_matrix(out, treated.sample_ids(), phi, numbered("phi", idx));
  std::printf("extended %lld spectra onto %zu coordinates\n", static_cast<long long>(phi.rows()), idx.size());
}

void cmd_alt_fit(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  const auto cfg = ExperimentConfig::load(config, seed);
  const auto data = load_experiment_data(cfg);
  const SpectraSet treated = pretreat(data.set, cfg.pretreatment);
  const DmapFeatures f = fit_dmap_features(treated.intensities(), cfg.dmaps);
  const Matrix second = data.sensor2.size() > 0 ? data.sensor2 : Matrix(treated.require_sizes());
  const AltDmapModel alt = fit_alt_offline(f.train, second, cfg.alt);
  save_dmap(f.model, out / "dmap");
  save_altdmap(alt, treated.sample_ids(), out / "alt");
  std::printf("alternating eigenvalues:");
  for (Index k = 0; k < alt.n_eig(); ++k) std::printf(" %.4g", alt.eigenvalues(k));
  std::printf("\nselected coordinates:");
  for (Index k : alt.selection.indices) std::printf(" %lld", static_cast<long long>(k));
  std::printf("\n");
}

void cmd_train(const std::string& workflow, const fs::path& config, std::optional<std::uint64_t> seed,
               const fs::path& out) {
  nlohmann::json j = read_json(config);
  if (!workflow.empty()) j["workflow"] = workflow;
  const auto cfg = ExperimentConfig::from_json(j, seed, config.parent_path());
  const RunOutput run = run_workflow(cfg);
  emit_report(run.report, out);
  run.model.save(out / "model");
  std::printf("%s (config %s), latent variables: %lld\n", run.report.workflow.c_str(),
              run.report.config_hash.c_str(), static_cast<long long>(run.report.latent_count));
  print_metrics("train", run.report.train, run.report.train_ids.size());
  print_metrics("test", run.report.test, run.report.test_ids.size());
}

void cmd_predict(const fs::path& model_dir, const fs::path& spectra, const fs::path& out) {
  const auto model = TrainedPipeline::load(model_dir);
  const SpectraSet set = load_spectra(spectra);
  const Vector pred = model.predict(set);
  std::ostringstream os;
  os << "sample_id,predicted_nm\n";
  for (Index i = 0; i < pred.size(); ++i)
    os << set.sample_ids()[static_cast<std::size_t>(i)] << ',' << format_double(pred(i)) << '\n';
  write_text_file(out, os.str());
  std::printf("predicted %lld samples\n", static_cast<long long>(pred.size()));
}

void cmd_evaluate(const fs::path& model_dir, const fs::path& spectra, const fs::path& sizes, const fs::path& out) {
  const auto model = TrainedPipeline::load(model_dir);
  const SpectraSet set = load_spectra(spectra, sizes);
  const Vector pred = model.predict(set);
  const Metrics m = compute_metrics(pred, set.require_sizes());
  fs::create_directories(out);
  write_text_file(out / "metrics.json", metrics_to_json(m, set.sample_ids()).dump(2) + "\n");
  std::ostringstream os;
  os << "sample_id,actual_nm,predicted_nm,split\n";
  for (Index i = 0; i < pred.size(); ++i)
    os << set.sample_ids()[static_cast<std::size_t>(i)] << ',' << format_double(set.require_sizes()(i)) << ','
       << format_double(pred(i)) << ",eval\n";
  write_text_file(out / "parity.csv", os.str());
  print_metrics("eval", m, static_cast<std::size_t>(pred.size()));
}

void cmd_report(const fs::path& run_dir, const fs::path& out) {
  const RunReport r = RunReport::from_json(read_json(run_dir / "report.json"));
  std::printf("workflow %s, config %s, latent variables %lld\n", r.workflow.c_str(), r.config_hash.c_str(),
              static_cast<long long>(r.latent_count));
  print_metrics("train", r.train, r.train_ids.size());
  print_metrics("test", r.test, r.test_ids.size());
  for (const auto& [k, v] : r.diagnostics.items())
    if (v.is_number()) std::printf("  %s = %.6g\n", k.c_str(), v.get<double>());
  if (!out.empty()) {
    RunReport copy = r;
    if (fs::exists(run_dir / "loss_history.csv")) copy.loss_history_csv = read_text_file(run_dir / "loss_history.csv");
    if (fs::exists(run_dir / "search.csv")) copy.search_csv = read_text_file(run_dir / "search.csv");
    emit_report(copy, out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polymer size prediction from Raman spectra"};
  app.require_subcommand(1);

  fs::path config, out, model_dir, spectra, sizes, run_dir;
  std::uint64_t seed = 0;
  std::string workflow, coords;
  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", config, "Experiment config JSON");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    return cmd->add_option("--seed", seed, "Override the top-level seed");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* synth_seed = add_common(synth, true);
  synth->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Apply the configured pretreatment");
  auto* pre_seed = add_common(pre, true);
  pre->add_option("--out", out, "Output directory")->required();

  auto* dmap = app.add_subcommand("dmap", "Diffusion maps");
  dmap->require_subcommand(1);
  auto* dmap_fit = dmap->add_subcommand("fit", "Fit DMAPs on every spectrum");
  auto* dmap_seed = add_common(dmap_fit, true);
  dmap_fit->add_option("--out", out, "Output directory")->required();
  auto* dmap_ext = dmap->add_subcommand("extend", "Nystrom-extend new spectra");
  dmap_ext->add_option("--model", model_dir, "Directory written by dmap fit")->required()->check(CLI::ExistingDirectory);
  dmap_ext->add_option("--spectra", spectra, "Spectra CSV")->required()->check(CLI::ExistingFile);
  dmap_ext->add_option("--coords", coords, "Comma-separated coordinate indices (default: all extendable)");
  dmap_ext->add_option("--out", out, "Output coordinates CSV")->required();

  auto* alt = app.add_subcommand("alt", "Alternating diffusion maps");
  alt->require_subcommand(1);
  auto* alt_fit = alt->add_subcommand("fit", "Offline DMAPs + AltDMAPs with sizes (or sensor2) as the second sensor");
  auto* alt_seed = add_common(alt_fit, true);
  alt_fit->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Run a workflow and emit its report and model");
  train->add_option("workflow", workflow, "Workflow (overrides the config)")
      ->check(CLI::IsMember(kWorkflows));
  auto* train_seed = add_common(train, true);
  train->add_option("--out", out, "Run directory")->required();

  auto* predict = app.add_subcommand("predict", "Predict sizes with a trained model");
  predict->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--spectra", spectra, "Spectra CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "Predictions CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on labelled spectra");
  evaluate->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--spectra", spectra, "Spectra CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--sizes", sizes, "Sizes CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("--run", run_dir, "Run directory with report.json")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "Re-emit the report files here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) cmd_synth(config, seed_option(synth_seed, seed), out);
    else if (pre->parsed()) cmd_preprocess(config, seed_option(pre_seed, seed), out);
    else if (dmap_fit->parsed()) cmd_dmap_fit(config, seed_option(dmap_seed, seed), out);
    else if (dmap_ext->parsed()) cmd_dmap_extend(model_dir, spectra, coords, out);
    else if (alt_fit->parsed()) cmd_alt_fit(config, seed_option(alt_seed, seed), out);
    else if (train->parsed()) cmd_train(workflow, config, seed_option(train_seed, seed), out);
    else if (predict->parsed()) cmd_predict(model_dir, spectra, out);
    else if (evaluate->parsed()) cmd_evaluate(model_dir, spectra, sizes, out);
    else if (report->parsed()) cmd_report(run_dir, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
