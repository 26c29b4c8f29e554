#include <doctest.h>

#include <cmath>

#include "specsize/conformal.hpp"
#include "test_support.hpp"

using namespace specsize;
using namespace specsize::testing;

namespace {

struct Task {
  Matrix phi;
  Vector size;
};

// Five coordinates; the size depends on phi_1 + 2 phi_2 only.
Task conformal_task(Index n, std::uint64_t seed) {
  Task t{random_matrix(n, 5, seed), Vector(n)};
  for (Index i = 0; i < n; ++i)
    t.size(i) = 340.0 + 80.0 * std::tanh(0.5 * (t.phi(i, 0) + 2.0 * t.phi(i, 1)));
  return t;
}

YShapedSpec task_spec() {
  YShapedSpec s;
  s.latent_dim = 5;
  s.encoder_hidden = {16};
  s.decoder_hidden = {16};
  s.head_hidden = {8};
  s.batch_size = 32;
  s.epochs = 200;
  s.seed = 3;
  return s;
}

Matrix fd_jacobian(const Network& net, const Vector& x) {
  constexpr double h = 1e-6;
  Matrix j(net.output_dim(), x.size());
  for (Index c = 0; c < x.size(); ++c) {
    Vector up = x, down = x;
    up(c) += h;
    down(c) -= h;
    j.col(c) = (net.forward(up.transpose()) - net.forward(down.transpose())).transpose() / (2.0 * h);
  }
  return j;
}

double r2(const Vector& pred, const Vector& actual) {
  return 1.0 - (pred - actual).squaredNorm() / (actual.array() - actual.mean()).square().sum();
}

}  // namespace

TEST_CASE("encoder jacobian oracles") {
  Rng rng(1);
  SUBCASE("linear layer") {
    const Network net = Network::glorot({4, 3}, Activation::identity, Activation::identity, rng);
    CHECK(network_jacobian(net, Vector::Random(4)) == net.layers()[0].weight);
  }
  SUBCASE("tanh at the origin") {
    Network net = Network::glorot({4, 6, 5, 3}, Activation::tanh, Activation::identity, rng);
    const auto& l = net.layers();
    const Matrix product = l[2].weight * l[1].weight * l[0].weight;
    CHECK((network_jacobian(net, Vector::Zero(4)) - product).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("finite differences") {
    Network net = Network::glorot({4, 7, 6, 3}, Activation::tanh, Activation::identity, rng);
    for (auto& layer : net.layers()) layer.bias = Vector::Random(layer.bias.size());
    const Vector x = Vector::Random(4);
    const Matrix a = network_jacobian(net, x), f = fd_jacobian(net, x);
    CHECK(((a - f).array().abs() / a.array().abs().max(1e-3)).maxCoeff() < 1e-5);
  }
}

TEST_CASE("orthogonality score") {
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(4, 4, 2)).householderQ();
  CHECK(jacobian_orthogonality(q) < 1e-12);
  CHECK(jacobian_orthogonality(q.topRows(3) * 7.0) < 1e-12);

  Matrix same(3, 4);
  same.row(0) = q.row(1);
  same.row(1) = q.row(1);
  same.row(2) = -2.0 * q.row(1);
  CHECK(jacobian_orthogonality(same) == doctest::Approx(1.0).epsilon(1e-14));

  const Matrix j = random_matrix(5, 6, 3);
  Vector scale(5);
  scale << 1.0, 1e-3, 40.0, 2.0, 0.5;
  CHECK(jacobian_orthogonality(scale.asDiagonal() * j) == doctest::Approx(jacobian_orthogonality(j)).epsilon(1e-12));

  Matrix with_zero = j;
  with_zero.row(2).setZero();
  Index excluded = 0;
  const double s = jacobian_orthogonality(with_zero, &excluded);
  CHECK(excluded == 1);
  CHECK((s >= 0.0 && s <= 1.0));
}

TEST_CASE("full loss gradient matches finite differences") {
  const auto task = conformal_task(3, 4);
  YShapedSpec spec;
  spec.latent_dim = 4;
  spec.encoder_hidden = {6, 5};
  spec.decoder_hidden = {5};
  spec.head_hidden = {4};
  spec.w_orth = 0.7;
  const auto data = conformal_task(20, 5);

  SUBCASE("all terms, tanh") {
    auto model = yae_init(data.phi, data.size, spec);
    CHECK(yae_grad_check(model, task.phi, task.size) < 1e-4);
  }
  SUBCASE("orthogonality term alone") {
    spec.w_recon = 0.0;
    spec.w_pred = 1e-9;
    auto model = yae_init(data.phi, data.size, spec);
    CHECK(yae_loss(model, task.phi, task.size, nullptr).orth > 0.0);
    CHECK(yae_grad_check(model, task.phi, task.size) < 1e-4);
  }
  SUBCASE("after training") {
    spec.epochs = 5;
    spec.batch_size = 4;
    spec.learning_rate = 1e-2;
    auto model = yae_fit(data.phi, data.size, spec);
    CHECK(yae_grad_check(model, task.phi, task.size) < 1e-4);
  }
}

TEST_CASE("linear autoencoder reconstructs full-rank data") {
  const auto data = conformal_task(60, 6);
  YShapedSpec spec;
  spec.latent_dim = 5;
  spec.encoder_hidden = {};
  spec.decoder_hidden = {};
  spec.head_hidden = {};
  spec.activation = Activation::identity;
  spec.w_orth = 0.0;
  spec.batch_size = 60;
  spec.learning_rate = 1e-3;
  spec.epochs = 5000;
  const auto model = yae_fit(data.phi, data.size, spec);
  CHECK(model.loss_history.back().recon < 1e-6);
  const Matrix back = decode(model, encode(model, data.phi));
  CHECK((back - data.phi).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("conformal disentangling on the synthetic task") {
  const auto train = conformal_task(300, 7);
  const auto test = conformal_task(100, 8);
  const auto model = yae_fit(train.phi, train.size, task_spec());

  for (const auto& l : model.loss_history) CHECK(std::isfinite(l.total));
  CHECK(model.loss_history.back().total <= model.loss_history.front().total);

  const Vector pred = predict_size(model, test.phi);
  CHECK(r2(pred, test.size) > 0.9);
  CHECK(orthogonality_score(model, test.phi).score < 0.05);

  // predict_size composes encode and the head on nu_1 only.
  Matrix nu = encode(model, test.phi);
  CHECK(head_predict(model, nu.col(0)) == pred);
  nu.rightCols(4).setRandom();
  CHECK(head_predict(model, nu.col(model.latent_index())) == pred);

  // First-order invariance along the null space of the nu_1 Jacobian row.
  constexpr double h = 1e-4;
  Rng rng(9);
  for (Index i = 0; i < 10; ++i) {
    const Vector p = test.phi.row(i).transpose();
    const Vector r = encoder_jacobian(model, p).row(0).transpose();
    Vector v(5);
    for (Index c = 0; c < 5; ++c) v(c) = rng.normal();
    v -= r * (r.dot(v) / r.squaredNorm());
    v.normalize();
    const Vector rhat = r.normalized();
    auto f = [&](const Vector& q) { return predict_size(model, q.transpose())(0); };
    const double along_null = (f(p + h * v) - f(p - h * v)) / (2.0 * h);
    const double along_row = (f(p + h * rhat) - f(p - h * rhat)) / (2.0 * h);
    CHECK(std::abs(along_null) < 1e-3 * std::abs(along_row));
  }
}

TEST_CASE("determinism and persistence") {
  const auto data = conformal_task(40, 10);
  auto spec = task_spec();
  spec.epochs = 5;
  const auto a = yae_fit(data.phi, data.size, spec);
  const auto b = yae_fit(data.phi, data.size, spec);
  CHECK(predict_size(a, data.phi) == predict_size(b, data.phi));
  CHECK(loss_history_csv(a.loss_history) == loss_history_csv(b.loss_history));
  CHECK(loss_history_csv(a.loss_history).rfind("epoch,recon,pred,orth,total\n1,", 0) == 0);

  const auto restored = yae_from_json(nlohmann::json::parse(yae_to_json(a).dump()));
  CHECK(predict_size(restored, data.phi) == predict_size(a, data.phi));
  CHECK(encode(restored, data.phi) == encode(a, data.phi));
}

TEST_CASE("spec validation and errors") {
  YShapedSpec s;
  s.latent_dim = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.w_pred = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.prediction_latent = 7;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(YShapedSpec::from_json({{"w_orth", -1.0}}), ConfigError);

  const auto data = conformal_task(20, 11);
  const auto model = yae_init(data.phi, data.size, task_spec());
  CHECK_THROWS_AS(encode(model, Matrix::Zero(2, 4)), DataError);
  CHECK_THROWS_AS(decode(model, Matrix::Zero(2, 3)), DataError);

  auto wild = task_spec();
  wild.activation = Activation::relu;
  wild.learning_rate = 1e200;
  wild.epochs = 20;
  try {
    yae_fit(data.phi, data.size, wild);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}
