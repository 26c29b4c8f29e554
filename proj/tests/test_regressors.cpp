#include <doctest.h>

#include <cmath>
#include <limits>

#include "specsize/regressors.hpp"
#include "test_support.hpp"

using namespace specsize;
using namespace specsize::testing;

namespace {

double r2(const Vector& pred, const Vector& actual) {
  const double ss_res = (pred - actual).squaredNorm();
  const double ss_tot = (actual.array() - actual.mean()).square().sum();
  return 1.0 - ss_res / ss_tot;
}

struct Linear {
  Matrix x;
  Vector y;
};

Linear linear_data(Index n, std::uint64_t seed) {
  Linear d{random_matrix(n, 2, seed), Vector(n)};
  d.y = 3.0 * d.x.col(0) - 2.0 * d.x.col(1);
  return d;
}

// X = T P^T with rank k; y depends on the latent scores only.
struct RankK {
  Matrix x;
  Matrix y;
};

RankK rank_k_data(Index n, Index p, Index k, std::uint64_t seed) {
  const Matrix t = random_matrix(n, k, seed);
  const Matrix load = random_matrix(p, k, seed + 1);
  const Matrix c = random_matrix(k, 1, seed + 2, 0.5, 2.0);
  return {t * load.transpose(), t * c};
}

}  // namespace

TEST_CASE("mlp reproduces a constant target") {
  const Matrix x = random_matrix(40, 3, 1);
  const Matrix y = Matrix::Constant(40, 1, 312.5);
  MlpSpec spec;
  spec.hidden = {8};
  spec.epochs = 20;
  const auto model = mlp_fit(x, y, spec);
  const Matrix pred = mlp_predict(model, random_matrix(10, 3, 2));
  CHECK((pred.array() - 312.5).abs().maxCoeff() < 1e-6);
}

TEST_CASE("mlp learns a linear map") {
  const auto train = linear_data(200, 3);
  const auto test = linear_data(100, 4);
  MlpSpec spec;
  spec.hidden = {16};
  spec.epochs = 400;
  spec.learning_rate = 3e-3;
  spec.seed = 5;
  const auto model = mlp_fit(train.x, train.y, spec);
  CHECK(r2(mlp_predict(model, test.x).col(0), test.y) > 0.999);
  CHECK(model.net.all_finite());
  CHECK(static_cast<Index>(model.loss_history.size()) == spec.epochs);

  const auto again = mlp_fit(train.x, train.y, spec);
  CHECK(mlp_predict(again, test.x) == mlp_predict(model, test.x));

  const auto restored = mlp_from_json(nlohmann::json::parse(mlp_to_json(model).dump()));
  CHECK(mlp_predict(restored, test.x) == mlp_predict(model, test.x));
}

TEST_CASE("mlp gradient matches finite differences") {
  const Matrix x = random_matrix(8, 3, 11);
  const Matrix y = random_matrix(8, 2, 12);
  MlpSpec spec;
  spec.hidden = {5, 4};
  spec.batch_size = 8;
  spec.l2 = 1e-3;

  SUBCASE("fresh tanh") {
    spec.epochs = 1;
    auto model = mlp_fit(x, y, spec);
    // Reinitialize to the untrained state.
    Rng rng(spec.seed);
    model.net = Network::glorot({3, 5, 4, 2}, Activation::tanh, Activation::identity, rng);
    CHECK(mlp_grad_check(model, x, y) < 1e-6);
  }
  SUBCASE("after 10 steps") {
    spec.epochs = 10;
    spec.learning_rate = 1e-2;
    CHECK(mlp_grad_check(mlp_fit(x, y, spec), x, y) < 1e-6);
  }
  SUBCASE("relu") {
    spec.activation = Activation::relu;
    spec.epochs = 10;
    CHECK(mlp_grad_check(mlp_fit(x, y, spec), x, y) < 1e-5);
  }
  SUBCASE("zero weights") {
    spec.epochs = 1;
    auto model = mlp_fit(x, y, spec);
    model.net.set_parameters(Vector::Zero(model.net.parameter_count()));
    Vector grad;
    const Matrix ys = y.rowwise() - y.colwise().mean();
    mlp_loss_gradient(model.net, x, ys, 0.0, &grad);
    // Only the output bias can carry gradient; hidden layers see tanh(0) = 0.
    const Index out_bias = 2;
    CHECK(grad.head(grad.size() - out_bias).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(mlp_grad_check(model, x, y) < 1e-6);
  }
}

TEST_CASE("gradient relative error floor") {
  Vector a(3), f(3);
  a << 1.0, 0.0, -2.0;
  f << 1.0, 1e-9, -2.0;
  // floor = 1e-3 * 2 so the near-zero entry contributes 1e-9 / 2e-3
  CHECK(gradient_relative_error(a, f) == doctest::Approx(5e-7).epsilon(1e-12));
}

TEST_CASE("mlp spec validation and divergence") {
  MlpSpec bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(MlpSpec::from_json({{"activation", "sigmoid"}}), ConfigError);
  CHECK_THROWS_AS(mlp_fit(Matrix::Zero(3, 2), Matrix::Zero(4, 1), MlpSpec{}), DataError);

  const auto d = linear_data(50, 21);
  MlpSpec wild;
  wild.hidden = {8};
  wild.activation = Activation::relu;
  wild.learning_rate = 1e200;
  wild.epochs = 50;
  try {
    mlp_fit(d.x, d.y, wild);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("gbt depth-0 tree predicts the mean") {
  const Matrix x = random_matrix(30, 2, 31);
  const Vector y = random_matrix(30, 1, 32).col(0);
  GbtSpec spec;
  spec.n_trees = 1;
  spec.max_depth = 0;
  const auto model = gbt_fit(x, y, spec);
  CHECK(model.base_score == y.mean());
  const Vector pred = gbt_predict(model, random_matrix(5, 2, 33));
  CHECK((pred.array() - y.mean()).abs().maxCoeff() < 1e-14);
  CHECK(model.trees[0].depth() == 0);
}

TEST_CASE("gbt finds a perfect split") {
  Matrix x = random_matrix(40, 3, 41);
  Vector y(40);
  for (Index i = 0; i < 40; ++i) y(i) = x(i, 1) < 0.2 ? 1.0 : 5.0;
  GbtSpec spec;
  spec.n_trees = 1;
  spec.max_depth = 1;
  spec.learning_rate = 1.0;
  spec.lambda = 0.0;
  const auto model = gbt_fit(x, y, spec);
  CHECK(model.trees[0].nodes[0].feature == 1);
  CHECK(model.train_mse.back() < 1e-24);
}

TEST_CASE("gbt training mse is non-increasing and respects structure") {
  const auto d = linear_data(120, 51);
  Vector y = d.y;
  Rng rng(52);
  for (Index i = 0; i < y.size(); ++i) y(i) += 0.3 * rng.normal();
  GbtSpec spec;
  spec.n_trees = 60;
  spec.max_depth = 3;
  spec.min_samples_leaf = 4;
  const auto model = gbt_fit(d.x, y, spec);
  REQUIRE(model.train_mse.size() == 61);
  for (std::size_t r = 1; r < model.train_mse.size(); ++r)
    CHECK(model.train_mse[r] <= model.train_mse[r - 1]);

  for (const auto& tree : model.trees) {
    CHECK(tree.depth() <= spec.max_depth);
    // Count training samples landing in each leaf.
    std::vector<Index> count(tree.nodes.size(), 0);
    for (Index i = 0; i < d.x.rows(); ++i) {
      Index n = 0;
      while (tree.nodes[static_cast<std::size_t>(n)].feature >= 0) {
        const auto& node = tree.nodes[static_cast<std::size_t>(n)];
        n = d.x(i, node.feature) < node.threshold ? node.left : node.right;
      }
      ++count[static_cast<std::size_t>(n)];
    }
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
      if (tree.nodes[n].feature < 0) CHECK(count[n] >= spec.min_samples_leaf);
  }

  const auto restored = gbt_from_json(nlohmann::json::parse(gbt_to_json(model).dump()));
  CHECK(gbt_predict(restored, d.x) == gbt_predict(model, d.x));
  CHECK(gbt_predict(gbt_fit(d.x, y, spec), d.x) == gbt_predict(model, d.x));
  CHECK_THROWS_AS(gbt_fit(Matrix(5, 0), Vector::Zero(5), spec), DataError);
}

TEST_CASE("pls recovers rank-k linear data") {
  const auto d = rank_k_data(80, 12, 3, 61);
  const auto model = pls_fit(d.x, d.y, 3);
  CHECK(r2(pls_predict(model, d.x).col(0), d.y.col(0)) > 0.999);

  const Matrix gram = model.scores.transpose() * model.scores;
  for (Index a = 0; a < 3; ++a)
    for (Index b = a + 1; b < 3; ++b)
      CHECK(std::abs(gram(a, b)) / std::sqrt(gram(a, a) * gram(b, b)) < 1e-8);

  CHECK(pls_choose_components(d.x, d.y, 8, 5, 62).n_components == 3);
  CHECK_THROWS_AS(pls_fit(d.x, d.y, 4), NumericError);

  const auto r2d = rank_k_data(60, 10, 2, 63);
  CHECK(pls_choose_components(r2d.x, r2d.y, 6, 5, 64).n_components == 2);
}

TEST_CASE("pls full rank matches least squares") {
  const Matrix x = random_matrix(50, 6, 71);
  const Matrix beta = random_matrix(6, 2, 72);
  const Matrix y = (x * beta).array() + 4.0;
  const auto model = pls_fit(x, y, 6);
  CHECK((pls_predict(model, x) - y).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((model.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8);

  const auto restored = pls_from_json(nlohmann::json::parse(pls_to_json(model).dump()));
  CHECK(pls_predict(restored, x) == pls_predict(model, x));
}

TEST_CASE("pls bounds and noise") {
  const Matrix x = random_matrix(30, 5, 81);
  const Matrix y = random_matrix(30, 1, 82);
  CHECK_THROWS_AS(pls_fit(x, y, 0), ConfigError);
  CHECK_THROWS_AS(pls_fit(x, y, 6), ConfigError);
  CHECK_THROWS_AS(pls_fit(Matrix(0, 5), Matrix(0, 1), 1), DataError);
  CHECK(pls_choose_components(random_matrix(60, 8, 83), random_matrix(60, 1, 84), 6, 5, 85)
            .n_components == 1);
}

TEST_CASE("random search") {
  const auto d = linear_data(60, 91);
  const Matrix y = d.y;
  // A model family whose single parameter scales the true coefficients.
  FitPredictFn scaled = [](const Matrix&, const Matrix&, const Matrix& xv, const nlohmann::json& p) {
    const double s = p.at("scale").get<double>();
    return Matrix(s * (3.0 * xv.col(0) - 2.0 * xv.col(1)));
  };

  SUBCASE("single draw") {
    SearchSpec spec;
    spec.n_draws = 1;
    spec.params["scale"] = ParamRange::from_json({{"uniform", {0.0, 2.0}}});
    const auto res = random_search(scaled, spec, d.x, y);
    REQUIRE(res.table.size() == 1);
    CHECK(res.best_params == res.table[0].params);
    CHECK(res.best_cv_mse == res.table[0].cv_mse);
  }
  SUBCASE("two configs") {
    SearchSpec spec = SearchSpec::from_json(
        {{"n_draws", 6}, {"folds", 3}, {"seed", 4}, {"params", {{"scale", {{"choice", {0.5, 1.0}}}}}}});
    const auto res = random_search(scaled, spec, d.x, y);
    CHECK(res.best_params.at("scale").get<double>() == 1.0);
    CHECK(res.best_cv_mse == 0.0);
  }
  SUBCASE("determinism and csv") {
    SearchSpec spec;
    spec.n_draws = 5;
    spec.seed = 9;
    spec.params["scale"] = ParamRange::from_json({{"log_uniform", {0.1, 10.0}}});
    spec.params["unused"] = ParamRange::from_json({{"int", {1, 3}}});
    const auto a = random_search(scaled, spec, d.x, y);
    const auto b = random_search(scaled, spec, d.x, y);
    CHECK(search_table_csv(a) == search_table_csv(b));
    CHECK(a.best_params == b.best_params);
    const auto csv = search_table_csv(a);
    CHECK(csv.rfind("draw_id,params_json,cv_mse\n", 0) == 0);
    CHECK(csv.find("\"{\"\"scale\"\":") != std::string::npos);
    for (const auto& row : a.table) {
      const auto k = row.params.at("unused").get<long long>();
      CHECK((k >= 1 && k <= 3));
    }
  }
  SUBCASE("diverged draws") {
    SearchSpec spec;
    spec.n_draws = 3;
    spec.params["scale"] = ParamRange::from_json({{"uniform", {0.0, 1.0}}});
    FitPredictFn boom = [](const Matrix&, const Matrix&, const Matrix&, const nlohmann::json&) -> Matrix {
      throw NumericError("diverged");
    };
    CHECK_THROWS_AS(random_search(boom, spec, d.x, y), NumericError);
    CHECK_THROWS_AS(ParamRange::from_json({{"gaussian", {0, 1}}}), ConfigError);
  }
}
