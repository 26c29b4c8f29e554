// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "ihm_fixtures.hpp"
#include "specsize/pipeline.hpp"
#include "test_support.hpp"

using namespace specsize;
using namespace specsize::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* title, double time_limit, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0.0) out.require(secs < time_limit, "runtime limit " + std::to_string(time_limit) + " s");
  if (!out.pass) ++failures;
  std::printf("[%s] AC%-2d %s (%.2f s)%s\n", out.pass ? "PASS" : "FAIL", id, title, secs, out.detail.str().c_str());
  std::fflush(stdout);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double r2(const Vector& pred, const Vector& actual) {
  return 1.0 - (pred - actual).squaredNorm() / (actual.array() - actual.mean()).square().sum();
}

// -- independent oracles ----------------------------------------------------

// Lower hull by Andrew's monotone chain, subtracted by linear interpolation.
Vector hull_subtraction(const std::vector<double>& w, const Vector& y) {
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < w.size(); ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      const double cross = (w[b] - w[a]) * (y(static_cast<Index>(i)) - y(static_cast<Index>(a))) -
                           (y(static_cast<Index>(b)) - y(static_cast<Index>(a))) * (w[i] - w[a]);
      if (cross > 0.0) break;
      hull.pop_back();
    }
    hull.push_back(i);
  }
  Vector out = Vector::Zero(y.size());
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t a = hull[h], b = hull[h + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double t = (w[i] - w[a]) / (w[b] - w[a]);
      out(static_cast<Index>(i)) =
          y(static_cast<Index>(i)) - (y(static_cast<Index>(a)) + t * (y(static_cast<Index>(b)) - y(static_cast<Index>(a))));
    }
  }
  return out;
}

// Rank-k data: X = T P^T, y = T q with T, P, q random.
struct RankK {
  Matrix x;
  Matrix y;
};
RankK rank_k(Index n, Index p, Index k, std::uint64_t seed) {
  const Matrix t = random_matrix(n, k, seed), load = random_matrix(p, k, seed + 1);
  const Matrix q = random_matrix(k, 1, seed + 2);
  return {t * load.transpose(), t * q};
}

nlohmann::json workflow_config(const std::string& wf) {
  return {{"workflow", wf},
          {"seed", 2},
          {"data", {{"synth", {{"kind", "peak_spectra"}, {"n_samples", 50}, {"grid_points", 200}, {"noise", 0.002}}}}},
          {"dmaps", {{"n_coords", 4}}},
          {"mlp", {{"hidden", {16}}, {"epochs", 200}}},
          {"gbt", {{"n_trees", 50}}},
          {"yshaped", {{"latent_dim", 4}, {"encoder_hidden", {16}}, {"decoder_hidden", {16}}, {"head_hidden", {8}}, {"epochs", 100}}},
          {"pls", {{"k_max", 6}, {"folds", 4}}},
          {"ihm", {{"seed_peaks", 6}}},
          {"altdmaps", {{"actual_alt_diagnostic", true}}}};
}

}  // namespace

int main() {
  criterion(1, "Markov and alternating kernels are row-stochastic; eigen-residuals <= 1e-8", 5.0, [](Outcome& o) {
    const std::vector<std::pair<Index, Index>> shapes{{200, 50}, {150, 10}, {60, 3}, {12, 2}};
    double row_err = 0.0, alt_row_err = 0.0, eig_res = 0.0, alt_eig_res = 0.0;
    std::uint64_t seed = 100;
    for (const auto& [n, d] : shapes) {
      const Matrix x1 = random_matrix(n, d, ++seed), x2 = random_matrix(n, std::max<Index>(1, d / 2), ++seed);
      for (bool dn : {true, false}) {
        KernelParams p1{epsilon_median_heuristic(pairwise_sq_distances(x1)), dn};
        KernelParams p2{epsilon_median_heuristic(pairwise_sq_distances(x2)), dn};
        const Matrix k = markov_kernel(x1, p1);
        row_err = std::max(row_err, (k.rowwise().sum().array() - 1.0).abs().maxCoeff());
        const Matrix ka = alternating_operator(x1, x2, p1, p2);
        alt_row_err = std::max(alt_row_err, (ka.rowwise().sum().array() - 1.0).abs().maxCoeff());

        const Index m = std::min<Index>(8, n);
        const DmapModel dm = fit_dmaps(x1, p1, m);
        const Matrix kd = dm.markov_matrix();
        for (Index c = 0; c < m; ++c) {
          const Vector v = dm.eigenvectors.col(c);
          eig_res = std::max(eig_res, (kd * v - dm.eigenvalues(c) * v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff());
        }
        const AltDmapModel alt = fit_altdmaps(x1, x2, p1, p2, std::min<Index>(5, n));
        for (Index c = 0; c < alt.n_eig(); ++c) {
          const Vector v = alt.coordinates.col(c);
          alt_eig_res = std::max(alt_eig_res, (ka * v - alt.eigenvalues(c) * v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff());
        }
      }
    }
    o.detail << " max|rowsum-1| K=" << row_err << " Kalt=" << alt_row_err << ", eigen-residual dmap=" << eig_res
             << " alt=" << alt_eig_res;
    o.require(row_err <= 1e-12, "K rows");
    o.require(alt_row_err <= 1e-12, "K_alt rows");
    o.require(eig_res <= 1e-8, "dmap eigen-residual");
    o.require(alt_eig_res <= 1e-8, "alt eigen-residual");
  });

  criterion(2, "500-point arc: |corr(phi_1, arclength)| > 0.99, Nystrom self-consistency <= 1e-8", 10.0, [](Outcome& o) {
    const ArcData arc = make_arc(500, 10, 1.5 * std::numbers::pi / 2.0, 31);
    KernelParams p{epsilon_median_heuristic(pairwise_sq_distances(arc.points)), true};
    const DmapModel m = fit_dmaps(arc.points, p, 6);
    const double corr = std::abs(pearson(m.eigenvectors.col(1), arc.arclength));
    const IndexList idx{1, 2, 3, 4, 5};
    const double dev = (nystrom_extend(m, arc.points, idx) - take_cols(m.eigenvectors, idx)).cwiseAbs().maxCoeff();
    o.detail << " corr=" << corr << " max Nystrom deviation=" << dev;
    o.require(corr > 0.99, "correlation");
    o.require(dev <= 1e-8, "Nystrom");
  });

  criterion(3, "Geometric-Harmonics lift on a 400-point manifold, held-out relative L2 < 1e-2", 0.0, [](Outcome& o) {
    const ArcData arc = make_arc(400, 5, std::numbers::pi, 41);
    const Vector f = (2.0 * arc.arclength.array()).sin() + 0.5 * arc.arclength.array();
    IndexList train, test;
    for (Index i = 0; i < 400; ++i) (i % 5 == 4 ? test : train).push_back(i);
    const Matrix xtr = take_rows(arc.points, train), xte = take_rows(arc.points, test);
    const double eps = 0.5 * epsilon_median_heuristic(pairwise_sq_distances(xtr));
    const GhModel gh = gh_fit(xtr, Matrix(take(f, train)), {eps, true});
    const Vector pred = gh_predict(gh, xte).col(0), want = take(f, test);
    const double rel = (pred - want).norm() / want.norm();
    o.detail << " relative L2=" << rel;
    o.require(rel < 1e-2, "lift error");
  });

  criterion(4, "AltDMAPs isolate the common variable; identical sensors give lambda^2", 0.0, [](Outcome& o) {
    const TwoSensorData d = make_two_sensor(600, 6.0, 7);
    const double e1 = 0.5 * epsilon_median_heuristic(pairwise_sq_distances(d.sensor1));
    const double e2 = 0.5 * epsilon_median_heuristic(pairwise_sq_distances(d.sensor2));
    const AltDmapModel alt = fit_altdmaps(d.sensor1, d.sensor2, {e1, true}, {e2, true}, 8);
    const DmapModel single = fit_dmaps(d.sensor1, {e1, true}, 8);
    const double r2_alt = ols_r2(alt_coordinates(alt, {1, 2}), d.circle);
    const double r2_single = ols_r2(single.eigenvectors.middleCols(1, 2), d.circle);

    const Matrix x = random_matrix(80, 4, 3);
    const KernelParams p{epsilon_median_heuristic(pairwise_sq_distances(x)), true};
    const double sq = (fit_altdmaps(x, x, p, p, 6).eigenvalues - fit_dmaps(x, p, 6).eigenvalues.cwiseAbs2())
                          .cwiseAbs()
                          .maxCoeff();
    o.detail << " R2 alt=" << r2_alt << " single-sensor=" << r2_single << ", |lambda_alt - lambda^2|=" << sq;
    o.require(r2_alt > 0.9, "alt R2");
    o.require(r2_alt > r2_single, "alt beats single sensor");
    o.require(sq <= 1e-8, "identical sensors");
  });

  criterion(5, "MLP and Y-shaped full-loss gradients vs central differences < 1e-4", 5.0, [](Outcome& o) {
    const Matrix x = random_matrix(8, 4, 51);
    Matrix y(8, 1);
    for (Index i = 0; i < 8; ++i) y(i, 0) = std::sin(x(i, 0)) + x(i, 1) * x(i, 2);
    MlpSpec ms;
    ms.hidden = {8, 6};
    ms.epochs = 20;
    ms.batch_size = 4;
    ms.l2 = 1e-3;
    const double mlp_err = mlp_grad_check(mlp_fit(x, y, ms), x, y);

    YShapedSpec ys;
    ys.latent_dim = 4;
    ys.encoder_hidden = {6, 5};
    ys.decoder_hidden = {5};
    ys.head_hidden = {4};
    ys.w_orth = 0.5;
    ys.epochs = 10;
    ys.batch_size = 4;
    const Matrix phi = random_matrix(8, 5, 52);
    const Vector size = 300.0 + 50.0 * phi.col(0).array();
    const double yae_err = yae_grad_check(yae_fit(phi, size, ys), phi, size);
    o.detail << " MLP=" << mlp_err << " Y-shaped=" << yae_err;
    o.require(mlp_err < 1e-4, "MLP");
    o.require(yae_err < 1e-4, "Y-shaped");
  });

  criterion(6, "Conformal disentangling: test R2 > 0.9, orthogonality < 0.05, nu_1-null invariance", 0.0, [](Outcome& o) {
    const auto task = [](Index n, std::uint64_t seed) {
      const Matrix phi = random_matrix(n, 5, seed);
      Vector s(n);
      for (Index i = 0; i < n; ++i) s(i) = 340.0 + 80.0 * std::tanh(0.5 * (phi(i, 0) + 2.0 * phi(i, 1)));
      return std::pair{phi, s};
    };
    const auto [phi_tr, s_tr] = task(300, 7);
    const auto [phi_te, s_te] = task(100, 8);
    YShapedSpec spec;
    spec.latent_dim = 5;
    spec.encoder_hidden = {16};
    spec.decoder_hidden = {16};
    spec.head_hidden = {8};
    spec.batch_size = 32;
    spec.epochs = 200;
    spec.seed = 3;
    const YShapedModel model = yae_fit(phi_tr, s_tr, spec);
    const double test_r2 = r2(predict_size(model, phi_te), s_te);
    const double orth = orthogonality_score(model, phi_te).score;

    constexpr double h = 1e-4;
    Rng rng(9);
    double worst = 0.0;
    for (Index i = 0; i < 20; ++i) {
      const Vector p = phi_te.row(i).transpose();
      const Vector r = encoder_jacobian(model, p).row(0).transpose();
      Vector v(5);
      for (Index c = 0; c < 5; ++c) v(c) = rng.normal();
      v -= r * (r.dot(v) / r.squaredNorm());
      v.normalize();
      const auto f = [&](const Vector& q) { return predict_size(model, q.transpose())(0); };
      const double null_slope = (f(p + h * v) - f(p - h * v)) / (2.0 * h);
      const double row_slope = (f(p + h * r.normalized()) - f(p - h * r.normalized())) / (2.0 * h);
      worst = std::max(worst, std::abs(null_slope) / std::abs(row_slope));
    }
    o.detail << " test R2=" << test_r2 << " orthogonality=" << orth << " null/row slope=" << worst;
    o.require(test_r2 > 0.9, "R2");
    o.require(orth < 0.05, "orthogonality");
    o.require(worst < 1e-3, "null-direction invariance");
  });

  criterion(7, "PLS rank-k recovery and choice; GBT monotone training MSE; depth-0 tree = mean", 0.0, [](Outcome& o) {
    bool pls_ok = true;
    for (Index k : {1, 2, 3, 5}) {
      const RankK d = rank_k(80, 12, k, 60 + static_cast<std::uint64_t>(k));
      const double fit_r2 = r2(pls_predict(pls_fit(d.x, d.y, k), d.x).col(0), d.y.col(0));
      const Index chosen = pls_choose_components(d.x, d.y, 8, 5, 7).n_components;
      o.detail << " k=" << k << ":R2=" << fit_r2 << ",chosen=" << chosen;
      pls_ok = pls_ok && fit_r2 > 0.999 && chosen == k;
    }
    o.require(pls_ok, "PLS");

    const Matrix x = random_matrix(150, 4, 70);
    Vector y(150);
    for (Index i = 0; i < 150; ++i) y(i) = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.3 * x(i, 3);
    GbtSpec gs;
    gs.n_trees = 60;
    const GbtModel g = gbt_fit(x, y, gs);
    bool monotone = true;
    for (std::size_t t = 1; t < g.train_mse.size(); ++t) monotone = monotone && g.train_mse[t] <= g.train_mse[t - 1];
    o.require(monotone, "GBT monotone");

    gs.max_depth = 0;
    const Vector flat = gbt_predict(gbt_fit(x, y, gs), x);
    const double dev = (flat.array() - y.mean()).abs().maxCoeff();
    o.detail << " GBT rounds=" << g.trees.size() << " depth-0 |pred-mean|=" << dev;
    o.require(dev <= 1e-12, "depth-0 mean");
  });

  criterion(8, "Pretreatment: rubber band = monotone-chain hull subtraction; SNV/minmax idempotent; line -> 0", 0.0, [](Outcome& o) {
    bool exact = true;
    double idem = 0.0, line = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      std::vector<double> w;
      double at = 800.0;
      for (int i = 0; i < 300; ++i) w.push_back(at += rng.uniform(0.5, 4.0));
      const WavenumberGrid grid(w);
      Vector y(300);
      for (Index i = 0; i < 300; ++i) y(i) = rng.normal() + 0.01 * w[static_cast<std::size_t>(i)];
      exact = exact && baseline_rubber_band(y, grid) == hull_subtraction(w, y);

      const Vector snv = normalize_snv(y), mm = normalize_minmax(y);
      idem = std::max({idem, (normalize_snv(snv) - snv).cwiseAbs().maxCoeff(),
                       (normalize_minmax(mm) - mm).cwiseAbs().maxCoeff()});
      const double a = rng.uniform(-5.0, 5.0), b = rng.uniform(-0.01, 0.01);
      const Vector l = a + b * grid.as_vector().array();
      line = std::max(line, baseline_linear_fit(l, grid).cwiseAbs().maxCoeff() / l.cwiseAbs().maxCoeff());
    }
    o.detail << " idempotence deviation=" << idem << " line residual=" << line;
    o.require(exact, "rubber band exact");
    o.require(idem < 1e-12, "idempotence");
    o.require(line < 1e-12, "linear fit");
  });

  criterion(9, "IHM self-fit relative error < 1e-4; free parameters 49 / 181 for 23/17/4 peaks", 0.0, [](Outcome& o) {
    const Vector grid = fingerprint_grid();
    const HardModel truth = lattice_structure(5);
    const Index n_med = free_parameter_count(truth, FitMode::medium);
    const Index n_high = free_parameter_count(truth, FitMode::high);
    o.require(n_med == 49 && n_high == 181, "parameter counts");

    const Vector spectrum = hard_model_eval(truth, grid);
    const FitResult med = fit_hard_model(perturbed(truth, FitMode::medium, 6), grid, spectrum, FitMode::medium);
    const Vector got = extract_parameters(med.model, FitMode::medium), want = extract_parameters(truth, FitMode::medium);
    double worst = 0.0;
    for (Index i = 0; i < got.size(); ++i) worst = std::max(worst, rel(got(i), want(i)));

    // High mode: compare baseline, weight * intensity, position, shape and hwhm.
    const FitResult high = fit_hard_model(perturbed(truth, FitMode::high, 8), grid, spectrum, FitMode::high);
    double worst_high = std::max(rel(high.model.offset, truth.offset), rel(high.model.slope, truth.slope));
    for (std::size_t c = 0; c < truth.components.size(); ++c) {
      for (std::size_t k = 0; k < truth.components[c].peaks.size(); ++k) {
        const Peak& a = high.model.components[c].peaks[k];
        const Peak& b = truth.components[c].peaks[k];
        worst_high = std::max({worst_high, rel(a.position, b.position), rel(a.shape, b.shape), rel(a.hwhm, b.hwhm),
                               rel(high.model.weights[c] * a.intensity, truth.weights[c] * b.intensity)});
      }
    }
    o.detail << " counts=" << n_med << "/" << n_high << " medium max rel err=" << worst
             << " high max rel err (identifiable)=" << worst_high;
    o.require(worst < 1e-4, "medium self-fit");
    o.require(worst_high < 1e-4, "high self-fit");
  });

  criterion(10, "Every workflow rerun with identical config yields byte-identical reports", 0.0, [](Outcome& o) {
    for (const auto& wf : kWorkflows) {
      const auto cfg = ExperimentConfig::from_json(workflow_config(wf));
      const auto a = run_workflow(cfg), b = run_workflow(cfg);
      const auto da = std::filesystem::temp_directory_path() / ("specsize_acceptance_a_" + wf);
      const auto db = std::filesystem::temp_directory_path() / ("specsize_acceptance_b_" + wf);
      std::filesystem::remove_all(da);
      std::filesystem::remove_all(db);
      emit_report(a.report, da);
      emit_report(b.report, db);
      bool same = true;
      for (const char* f : {"report.json", "metrics.csv", "parity.csv"})
        same = same && read_text_file(da / f) == read_text_file(db / f);
      o.detail << " " << wf << (same ? ":same" : ":DIFFERENT");
      o.require(same, wf);
    }
  });

  std::printf("[SKIP] AC11 Optional dataset replication (requires the published microgel spectra, not bundled)\n");
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}
