#include <cmath>
#include <numeric>

#include "specsize/regressors.hpp"

namespace specsize {

void MlpSpec::validate() const {
  for (Index w : hidden) {
    if (w < 1) throw ConfigError("mlp: hidden widths must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("mlp: learning_rate must be positive");
  if (epochs < 1) throw ConfigError("mlp: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("mlp: batch_size must be >= 1");
  if (!(l2 >= 0.0)) throw ConfigError("mlp: l2 must be >= 0");
}

nlohmann::json MlpSpec::to_json() const {
  return {{"hidden", hidden},   {"activation", to_string(activation)},
          {"learning_rate", learning_rate}, {"epochs", epochs},
          {"batch_size", batch_size}, {"l2", l2}, {"seed", seed}};
}

MlpSpec MlpSpec::from_json(const nlohmann::json& j) { return from_json(j, MlpSpec{}); }

MlpSpec MlpSpec::from_json(const nlohmann::json& j, const MlpSpec& defaults) {
  MlpSpec s = defaults;
  try {
    if (j.contains("hidden")) s.hidden = j.at("hidden").get<std::vector<Index>>();
    if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.l2 = j.value("l2", s.l2);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mlp spec: ") + e.what());
  }
  s.validate();
  return s;
}

ColumnScaler fit_standardizer(const Matrix& m) {
  ColumnScaler s;
  s.mean = m.colwise().mean().transpose();
  s.sd.resize(m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    const double ss = (m.col(c).array() - s.mean(c)).square().sum();
    s.sd(c) = m.rows() > 1 ? std::sqrt(ss / static_cast<double>(m.rows() - 1)) : 0.0;
  }
  return s;
}

Matrix standardize(const ColumnScaler& s, const Matrix& m) {
  const Vector div = (s.sd.array() > 0.0).select(s.sd, Vector::Ones(s.sd.size()));
  return (m.rowwise() - s.mean.transpose()).array().rowwise() / div.transpose().array();
}

Matrix destandardize(const ColumnScaler& s, const Matrix& m) {
  return (m.array().rowwise() * s.sd.transpose().array()).matrix().rowwise() + s.mean.transpose();
}

double mlp_loss_gradient(const Network& net, const Matrix& xs, const Matrix& ys, double l2,
                         Vector* grad) {
  Network::Cache cache;
  const Matrix out = net.forward(xs, cache);
  const Matrix diff = out - ys;
  const double denom = static_cast<double>(diff.size());
  double loss = diff.squaredNorm() / denom;
  for (const auto& layer : net.layers()) loss += l2 * layer.weight.squaredNorm();
  if (grad) {
    auto g = net.zero_grad();
    net.backward(cache, (2.0 / denom) * diff, g);
    for (std::size_t l = 0; l < g.size(); ++l) g[l].weight += 2.0 * l2 * net.layers()[l].weight;
    *grad = Network::flatten(g);
  }
  return loss;
}

MlpModel mlp_fit(const Matrix& x, const Matrix& y, const MlpSpec& spec) {
  spec.validate();
  if (x.rows() != y.rows()) throw DataError("mlp: X rows do not match y length");
  if (x.rows() < 2) throw DataError("mlp: need at least 2 samples");
  if (!x.allFinite() || !y.allFinite()) throw DataError("mlp: non-finite training data");

  MlpModel model;
  model.spec = spec;
  model.x_scale = fit_standardizer(x);
  model.y_scale = fit_standardizer(y);
  const Matrix xs = standardize(model.x_scale, x);
  const Matrix ys = standardize(model.y_scale, y);

  std::vector<Index> widths{x.cols()};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(y.cols());
  Rng rng(spec.seed);
  model.net = Network::glorot(widths, spec.activation, Activation::identity, rng);

  Adam opt(model.net.parameter_count(), spec.learning_rate);
  Vector params = model.net.parameters();
  Vector grad;
  IndexList order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch = std::min(spec.batch_size, x.rows());

  for (Index epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(order);
    for (Index start = 0; start < x.rows(); start += batch) {
      const Index len = std::min(batch, x.rows() - start);
      IndexList idx(order.begin() + start, order.begin() + start + len);
      mlp_loss_gradient(model.net, take_rows(xs, idx), take_rows(ys, idx), spec.l2, &grad);
      opt.step(params, grad);
      model.net.set_parameters(params);
    }
    const double loss = mlp_loss_gradient(model.net, xs, ys, 0.0, nullptr);
    if (!std::isfinite(loss) || !model.net.all_finite())
      throw NumericError("mlp: training diverged at epoch " + std::to_string(epoch + 1));
    model.loss_history.push_back(loss);
  }
  return model;
}

Matrix mlp_predict(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.net.input_dim()) throw DataError("mlp: input dimension mismatch");
  return destandardize(model.y_scale, model.net.forward(standardize(model.x_scale, x)));
}

double gradient_relative_error(const Vector& analytic, const Vector& numeric, double floor_scale) {
  if (analytic.size() != numeric.size()) throw DataError("gradient length mismatch");
  const double floor = std::max(floor_scale * analytic.cwiseAbs().maxCoeff(), kGradientAbsoluteFloor);
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

double mlp_grad_check(const MlpModel& model, const Matrix& x, const Matrix& y) {
  const Matrix xs = standardize(model.x_scale, x);
  const Matrix ys = standardize(model.y_scale, y);
  Vector analytic;
  mlp_loss_gradient(model.net, xs, ys, model.spec.l2, &analytic);
  Network probe = model.net;
  const Vector theta = probe.parameters();
  Vector numeric(theta.size());
  constexpr double h = 1e-6;
  Vector t = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    t(i) = theta(i) + h;
    probe.set_parameters(t);
    const double up = mlp_loss_gradient(probe, xs, ys, model.spec.l2, nullptr);
    t(i) = theta(i) - h;
    probe.set_parameters(t);
    const double down = mlp_loss_gradient(probe, xs, ys, model.spec.l2, nullptr);
    t(i) = theta(i);
    numeric(i) = (up - down) / (2.0 * h);
  }
  return gradient_relative_error(analytic, numeric);
}

nlohmann::json mlp_to_json(const MlpModel& m) {
  return {{"format", "specsize.mlp"},
          {"version", 1},
          {"spec", m.spec.to_json()},
          {"x_mean", vector_to_json(m.x_scale.mean)},
          {"x_sd", vector_to_json(m.x_scale.sd)},
          {"y_mean", vector_to_json(m.y_scale.mean)},
          {"y_sd", vector_to_json(m.y_scale.sd)},
          {"layers", m.net.to_json()}};
}

MlpModel mlp_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "specsize.mlp" || j.value("version", 0) != 1)
    throw DataError("mlp model: unsupported format or version");
  MlpModel m;
  m.spec = MlpSpec::from_json(j.at("spec"));
  m.x_scale = {vector_from_json(j.at("x_mean")), vector_from_json(j.at("x_sd"))};
  m.y_scale = {vector_from_json(j.at("y_mean")), vector_from_json(j.at("y_sd"))};
  m.net = Network::from_json(j.at("layers"));
  return m;
}

}  // namespace specsize
