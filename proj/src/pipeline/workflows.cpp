#include <algorithm>
#include <cmath>
#include <numeric>

#include "specsize/pipeline.hpp"

namespace specsize {

Matrix Head::predict(const Matrix& x) const {
  if (kind == "nn") return mlp_predict(mlp, x);
  if (kind == "gbt") return gbt_predict_multi(gbt, x);
  throw ConfigError("unknown regressor kind: " + kind);
}

nlohmann::json Head::to_json() const {
  nlohmann::json j{{"kind", kind}};
  if (kind == "nn") {
    j["model"] = mlp_to_json(mlp);
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : gbt) arr.push_back(gbt_to_json(m));
    j["models"] = arr;
  }
  return j;
}

Head Head::from_json(const nlohmann::json& j) {
  Head h;
  h.kind = j.at("kind").get<std::string>();
  if (h.kind == "nn") {
    h.mlp = mlp_from_json(j.at("model"));
  } else if (h.kind == "gbt") {
    for (const auto& m : j.at("models")) h.gbt.push_back(gbt_from_json(m));
  } else {
    throw DataError("unknown regressor kind: " + h.kind);
  }
  return h;
}

namespace {

double median_epsilon(const Matrix& x) { return epsilon_median_heuristic(pairwise_sq_distances(x)); }

Matrix as_column(const Vector& v) { return Matrix(v); }

double mean_sq(const Matrix& a, const Matrix& b) {
  return (a - b).squaredNorm() / static_cast<double>(std::max<Index>(a.size(), 1));
}

Head fit_head_with(const std::string& kind, const Matrix& x, const Matrix& y, const MlpSpec& mlp,
                   const GbtSpec& gbt) {
  Head h;
  h.kind = kind;
  if (kind == "nn") {
    h.mlp = mlp_fit(x, y, mlp);
  } else if (kind == "gbt") {
    h.gbt = gbt_fit_multi(x, y, gbt);
  } else {
    throw ConfigError("unknown regressor kind: " + kind);
  }
  return h;
}

/// Regressor fit with an optional random search over its spec fields. The
/// drawn parameters overlay the configured spec.
Head fit_head(const std::string& kind, const Matrix& x, const Matrix& y, const ExperimentConfig& cfg,
              std::string* search_csv, nlohmann::json* diagnostics) {
  if (!cfg.search) return fit_head_with(kind, x, y, cfg.mlp, cfg.gbt);
  const FitPredictFn fn = [&](const Matrix& xtr, const Matrix& ytr, const Matrix& xval,
                              const nlohmann::json& params) {
    return fit_head_with(kind, xtr, ytr, MlpSpec::from_json(params, cfg.mlp),
                         GbtSpec::from_json(params, cfg.gbt))
        .predict(xval);
  };
  const auto result = random_search(fn, *cfg.search, x, y);
  if (search_csv) *search_csv = search_table_csv(result);
  if (diagnostics) {
    (*diagnostics)["search_best_params"] = result.best_params;
    (*diagnostics)["search_best_cv_mse"] = result.best_cv_mse;
  }
  return fit_head_with(kind, x, y, MlpSpec::from_json(result.best_params, cfg.mlp),
                       GbtSpec::from_json(result.best_params, cfg.gbt));
}

YShapedSpec overlay(const YShapedSpec& base, const nlohmann::json& params) {
  nlohmann::json j = base.to_json();
  for (const auto& [k, v] : params.items()) j[k] = v;
  return YShapedSpec::from_json(j);
}

Index resolve_n_test(const SplitSpec& split, Index n) {
  if (n < 3) throw DataError("need at least 3 labelled samples to split");
  Index n_test = split.n_test > 0
                     ? split.n_test
                     : static_cast<Index>(std::llround(split.test_fraction * static_cast<double>(n)));
  n_test = std::clamp<Index>(n_test, 1, n - 2);
  return n_test;
}

Matrix ihm_features(const HardModel& base, const Vector& grid, const Matrix& x, FitMode mode,
                    const FitOptions& opts, std::vector<double>* sse, Index* unconverged) {
  Matrix out(x.rows(), free_parameter_count(base, mode));
  for (Index i = 0; i < x.rows(); ++i) {
    const FitResult fit = fit_hard_model(base, grid, x.row(i).transpose(), mode, opts);
    out.row(i) = extract_parameters(fit.model, mode).transpose();
    if (sse) sse->push_back(fit.sse);
    if (unconverged && !fit.converged) ++*unconverged;
  }
  return out;
}

}  // namespace

DmapFeatures fit_dmap_features(const Matrix& x_train, const DmapsConfig& cfg) {
  const Index n = x_train.rows();
  if (n < 3) throw DataError("diffusion maps need at least 3 training spectra");
  KernelParams params;
  params.density_normalize = cfg.density_normalize;
  params.epsilon = cfg.epsilon ? *cfg.epsilon : median_epsilon(x_train) * cfg.epsilon_scale;
  const Index wanted = (cfg.select ? std::max(cfg.n_candidates, cfg.n_coords) : cfg.n_coords) + 1;
  DmapFeatures f;
  f.model = fit_dmaps(x_train, params, std::min(wanted, n));
  const Index usable = extendable_count(f.model) - 1;
  if (usable < 1) throw NumericError("diffusion maps: no nontrivial coordinate can be extended");

  if (cfg.select && usable >= 2) {
    const Matrix candidates = f.model.eigenvectors.middleCols(1, usable);
    const EigenSelection sel = local_linear_residual(candidates);
    for (Index c : sel.indices) {
      if (static_cast<Index>(f.coords.size()) >= cfg.n_coords) break;
      f.coords.push_back(c + 1);
    }
  }
  if (f.coords.empty()) {
    for (Index k = 1; k <= std::min(cfg.n_coords, usable); ++k) f.coords.push_back(k);
  }
  f.train = take_cols(f.model.eigenvectors, f.coords);
  return f;
}

AltDmapModel fit_alt_offline(const Matrix& sensor1, const Matrix& second, const AltConfig& cfg) {
  if (sensor1.rows() != second.rows()) throw DataError("altdmaps: sensors are not aligned");
  KernelParams p1, p2;
  p1.epsilon = median_epsilon(sensor1) * cfg.epsilon_scale;
  p2.epsilon = median_epsilon(second) * cfg.epsilon_scale;
  return fit_altdmaps(sensor1, second, p1, p2, std::min(cfg.n_eig, sensor1.rows()));
}

IndexList alt_selected_coords(const AltDmapModel& alt, Index max_coords) {
  IndexList out;
  for (Index c : alt.selection.indices) {
    if (c == 0) continue;
    if (static_cast<Index>(out.size()) >= max_coords) break;
    out.push_back(c);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

Vector TrainedPipeline::predict_pretreated(const Matrix& x) const {
  if (x.cols() != static_cast<Index>(grid.size()))
    throw DataError("spectra have " + std::to_string(x.cols()) + " points, model expects " +
                    std::to_string(grid.size()));
  if (workflow == "direct_dmaps_nn" || workflow == "direct_dmaps_gbt") {
    return head->predict(nystrom_extend(*dmap, x, coords)).col(0);
  }
  if (workflow == "altdmaps") {
    const Matrix phi = nystrom_extend(*dmap, x, coords);
    const Matrix psi = alt_kind == "gh" ? gh_predict(*gh, phi) : alt_head->predict(phi);
    return head->predict(psi).col(0);
  }
  if (workflow == "yshaped") return predict_size(*yae, nystrom_extend(*dmap, x, coords));
  if (workflow == "pls_direct") return pls_predict(*pls, standardize(*x_scale, x)).col(0);
  if (workflow == "ihm_pls") {
    const Matrix params = ihm_features(*hard_model, grid.as_vector(), x, ihm_mode, ihm_fit, nullptr, nullptr);
    return pls_predict(*pls, standardize(*x_scale, params)).col(0);
  }
  throw ConfigError("unknown workflow: " + workflow);
}

Vector TrainedPipeline::predict(const SpectraSet& raw) const {
  const SpectraSet treated = specsize::pretreat(raw, pretreatment);
  if (!(treated.grid() == grid)) throw DataError("pretreated wavenumber grid does not match the model");
  return predict_pretreated(treated.intensities());
}

RunOutput run_workflow(const ExperimentConfig& config) {
  return run_workflow(config, load_experiment_data(config));
}

RunOutput run_workflow(const ExperimentConfig& cfg, const LoadedData& data) {
  const SpectraSet& raw = data.set;
  const Vector& sizes = raw.require_sizes();
  const SpectraSet treated = pretreat(raw, cfg.pretreatment);
  const Matrix& x = treated.intensities();
  const Index n = x.rows();
  const auto [train, test] = split_indices(n, resolve_n_test(cfg.split, n), cfg.split.seed);
  const Matrix x_train = take_rows(x, train);
  const Vector y_train = take(sizes, train);

  RunOutput out;
  RunReport& rep = out.report;
  TrainedPipeline& model = out.model;
  rep.workflow = cfg.workflow;
  rep.config_hash = cfg.hash();
  rep.config = cfg.canonical;
  rep.train_indices = train;
  rep.test_indices = test;
  model.workflow = cfg.workflow;
  model.pretreatment = cfg.pretreatment;
  model.grid = treated.grid();
  auto& diag = rep.diagnostics;

  const bool uses_dmap = cfg.workflow == "direct_dmaps_nn" || cfg.workflow == "direct_dmaps_gbt" ||
                         cfg.workflow == "altdmaps" || cfg.workflow == "yshaped";
  DmapFeatures feats;
  if (uses_dmap) {
    feats = fit_dmap_features(x_train, cfg.dmaps);
    model.dmap = feats.model;
    model.coords = feats.coords;
    diag["dmap_epsilon"] = feats.model.params.epsilon;
    diag["dmap_coords"] = feats.coords;
    diag["nystrom_self_mse"] = mean_sq(nystrom_extend(feats.model, x_train, feats.coords), feats.train);
  }

  if (cfg.workflow == "direct_dmaps_nn" || cfg.workflow == "direct_dmaps_gbt") {
    const std::string kind = cfg.workflow == "direct_dmaps_nn" ? "nn" : "gbt";
    model.head = fit_head(kind, feats.train, as_column(y_train), cfg, &rep.search_csv, &diag);
    rep.latent_count = static_cast<Index>(feats.coords.size());
  } else if (cfg.workflow == "altdmaps") {
    const Matrix second = data.sensor2.size() > 0 ? take_rows(data.sensor2, train) : as_column(y_train);
    AltDmapModel alt = fit_alt_offline(feats.train, second, cfg.alt);
    model.alt_coords = alt_selected_coords(alt, cfg.alt.max_coords);
    for (Index i : train) model.alt_ids.push_back(raw.sample_ids()[static_cast<std::size_t>(i)]);
    const Matrix psi = alt_coordinates(alt, model.alt_coords);
    diag["alt_eigenvalues"] = std::vector<double>(alt.eigenvalues.data(), alt.eigenvalues.data() + alt.n_eig());
    diag["alt_selection"] = alt.selection.indices;
    diag["alt_coords"] = model.alt_coords;

    model.alt_kind = cfg.alt.alt_regressor;
    Matrix psi_hat;
    if (model.alt_kind == "gh") {
      KernelParams gp{median_epsilon(feats.train) * cfg.alt.gh_epsilon_scale, cfg.dmaps.density_normalize};
      model.gh = gh_fit(feats.train, psi, gp, cfg.alt.gh_cutoff);
      psi_hat = gh_predict(*model.gh, feats.train);
    } else {
      model.alt_head = fit_head_with("gbt", feats.train, psi, cfg.mlp, cfg.gbt);
      psi_hat = model.alt_head->predict(feats.train);
    }
    diag["alt_prediction_mse_train"] = mean_sq(psi_hat, psi);
    model.head = fit_head(cfg.alt.size_regressor, psi, as_column(y_train), cfg, &rep.search_csv, &diag);
    model.alt = std::move(alt);
    rep.latent_count = static_cast<Index>(model.alt_coords.size());

    if (cfg.alt.actual_alt_diagnostic) {
      // Joint fit over every sample: compares size prediction from the
      // actual test AltDMAPs with prediction from f_AltD outputs.
      const Matrix phi_all = nystrom_extend(feats.model, x, feats.coords);
      const Matrix second_all = data.sensor2.size() > 0 ? data.sensor2 : as_column(sizes);
      const AltDmapModel joint = fit_alt_offline(phi_all, second_all, cfg.alt);
      const Matrix psi_all = alt_coordinates(joint, alt_selected_coords(joint, cfg.alt.max_coords));
      const Matrix psi_tr = take_rows(psi_all, train), psi_te = take_rows(psi_all, test);
      const Matrix phi_tr = take_rows(phi_all, train), phi_te = take_rows(phi_all, test);
      Matrix psi_te_hat;
      if (model.alt_kind == "gh") {
        KernelParams gp{median_epsilon(phi_tr) * cfg.alt.gh_epsilon_scale, cfg.dmaps.density_normalize};
        psi_te_hat = gh_predict(gh_fit(phi_tr, psi_tr, gp, cfg.alt.gh_cutoff), phi_te);
      } else {
        psi_te_hat = fit_head_with("gbt", phi_tr, psi_tr, cfg.mlp, cfg.gbt).predict(phi_te);
      }
      const Head f_size = fit_head_with(cfg.alt.size_regressor, psi_tr, as_column(y_train), cfg.mlp, cfg.gbt);
      const Vector y_test = take(sizes, test);
      diag["actual_alt"] = {
          {"alt_prediction_mse_test", mean_sq(psi_te_hat, psi_te)},
          {"test_r2_actual", compute_metrics(f_size.predict(psi_te).col(0), y_test).r2},
          {"test_r2_predicted", compute_metrics(f_size.predict(psi_te_hat).col(0), y_test).r2}};
    }
  } else if (cfg.workflow == "yshaped") {
    YShapedSpec spec = cfg.yshaped;
    if (cfg.search) {
      const FitPredictFn fn = [&](const Matrix& xtr, const Matrix& ytr, const Matrix& xval,
                                  const nlohmann::json& params) {
        return Matrix(predict_size(yae_fit(xtr, ytr.col(0), overlay(cfg.yshaped, params)), xval));
      };
      const auto result = random_search(fn, *cfg.search, feats.train, as_column(y_train));
      rep.search_csv = search_table_csv(result);
      diag["search_best_params"] = result.best_params;
      diag["search_best_cv_mse"] = result.best_cv_mse;
      spec = overlay(cfg.yshaped, result.best_params);
    }
    model.yae = yae_fit(feats.train, y_train, spec);
    rep.loss_history_csv = loss_history_csv(model.yae->loss_history);
    rep.latent_count = 1;
    const auto orth_train = orthogonality_score(*model.yae, feats.train);
    diag["orthogonality_score_train"] = orth_train.score;
    const Matrix phi_test = nystrom_extend(feats.model, take_rows(x, test), feats.coords);
    const auto orth = orthogonality_score(*model.yae, phi_test);
    diag["orthogonality_score"] = orth.score;
    diag["orthogonality_excluded_rows"] = orth.excluded_rows;
    const Matrix recon = decode(*model.yae, encode(*model.yae, phi_test));
    diag["reconstruction_rel_l2"] = (recon - phi_test).norm() / std::max(phi_test.norm(), 1e-300);
  } else if (cfg.workflow == "pls_direct" || cfg.workflow == "ihm_pls") {
    Matrix features = x_train;
    if (cfg.workflow == "ihm_pls") {
      const Vector grid = treated.grid().as_vector();
      std::vector<ComponentModel> comps = cfg.ihm.components;
      if (comps.empty()) {
        const Vector mean = x_train.colwise().mean().transpose();
        comps.push_back(seed_component("mean_spectrum", grid, mean, cfg.ihm.seed_peaks));
      }
      model.hard_model = hard_model_from_components(std::move(comps));
      model.ihm_mode = cfg.ihm.mode;
      model.ihm_fit = cfg.ihm.fit;
      std::vector<double> sse;
      Index unconverged = 0;
      features = ihm_features(*model.hard_model, grid, x_train, cfg.ihm.mode, cfg.ihm.fit, &sse, &unconverged);
      diag["ihm_parameter_count"] = features.cols();
      diag["ihm_parameter_names"] = parameter_names(*model.hard_model, cfg.ihm.mode);
      diag["ihm_mean_train_sse"] = std::accumulate(sse.begin(), sse.end(), 0.0) / static_cast<double>(sse.size());
      diag["ihm_unconverged_train"] = unconverged;
    }
    model.x_scale = fit_standardizer(features);
    const Matrix z = standardize(*model.x_scale, features);
    const auto choice = pls_choose_components(z, as_column(y_train), cfg.pls.k_max,
                                              std::min<Index>(cfg.pls.folds, z.rows()), cfg.seed);
    model.pls = pls_fit(z, as_column(y_train), choice.n_components);
    diag["pls_cv_mse"] = choice.cv_mse;
    rep.latent_count = choice.n_components;
  } else {
    throw ConfigError("unknown workflow: " + cfg.workflow);
  }

  const Vector pred = model.predict_pretreated(x);
  if (!pred.allFinite()) throw NumericError(cfg.workflow + ": non-finite size prediction");
  const Vector pred_train = take(pred, train), pred_test = take(pred, test);
  rep.train = compute_metrics(pred_train, y_train);
  rep.test = compute_metrics(pred_test, take(sizes, test));
  for (Index i : train) rep.train_ids.push_back(raw.sample_ids()[static_cast<std::size_t>(i)]);
  for (Index i : test) rep.test_ids.push_back(raw.sample_ids()[static_cast<std::size_t>(i)]);

  std::vector<std::string> split_of(static_cast<std::size_t>(n), "train");
  for (Index i : test) split_of[static_cast<std::size_t>(i)] = "test";
  for (Index i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    rep.parity.push_back({raw.sample_ids()[s], sizes(i), pred(i), split_of[s]});
  }
  rep.cluster_labels = kmeans2(raw.intensities());
  return out;
}

}  // namespace specsize
