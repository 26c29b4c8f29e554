#include "specsize/network.hpp"

#include <cmath>

namespace specsize {

Activation parse_activation(const std::string& name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
  }
  return z;
}

double activate_d1(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

double activate_d2(Activation a, double z) {
  if (a != Activation::tanh) return 0.0;
  const double t = std::tanh(z);
  return -2.0 * t * (1.0 - t * t);
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows())
      throw ConfigError("network layer bias does not match weight rows");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
      throw ConfigError("network layer shapes do not chain");
  }
}

Network Network::glorot(const std::vector<Index>& widths, Activation hidden, Activation output,
                        Rng& rng) {
  if (widths.size() < 2) throw ConfigError("network needs at least input and output widths");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index in = widths[l], out = widths[l + 1];
    if (in < 1 || out < 1) throw ConfigError("network layer widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer layer;
    layer.weight.resize(out, in);
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight(i) = rng.uniform(-limit, limit);
    layer.bias = Vector::Zero(out);
    layer.act = (l + 2 == widths.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

Index Network::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
Index Network::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

Matrix Network::forward(const Matrix& x) const {
  Matrix h = x;
  for (const auto& layer : layers_) {
    Matrix z = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    h = z.unaryExpr([&](double v) { return activate(layer.act, v); });
  }
  return h;
}

Matrix Network::forward(const Matrix& x, Cache& cache) const {
  if (x.cols() != input_dim()) throw DataError("network input dimension mismatch");
  cache.inputs.clear();
  cache.pre.clear();
  Matrix h = x;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(h);
    Matrix z = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    h = z.unaryExpr([&](double v) { return activate(layer.act, v); });
    cache.pre.push_back(std::move(z));
  }
  return h;
}

Matrix Network::backward(const Cache& cache, const Matrix& grad_out, NetworkGrad& grad) const {
  Matrix delta = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const Matrix dz =
        delta.cwiseProduct(cache.pre[li].unaryExpr([&](double v) { return activate_d1(layer.act, v); }));
    grad[li].weight.noalias() += dz.transpose() * cache.inputs[li];
    grad[li].bias.noalias() += dz.colwise().sum().transpose();
    delta = dz * layer.weight;
  }
  return delta;
}

NetworkGrad Network::zero_grad() const {
  NetworkGrad g;
  for (const auto& layer : layers_)
    g.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  return g;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Vector Network::parameters() const {
  Vector flat(parameter_count());
  Index pos = 0;
  for (const auto& layer : layers_) {
    flat.segment(pos, layer.weight.size()) = layer.weight.reshaped();
    pos += layer.weight.size();
    flat.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return flat;
}

void Network::set_parameters(const Vector& flat) {
  if (flat.size() != parameter_count()) throw DataError("parameter vector length mismatch");
  Index pos = 0;
  for (auto& layer : layers_) {
    layer.weight.reshaped() = flat.segment(pos, layer.weight.size());
    pos += layer.weight.size();
    layer.bias = flat.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
}

Vector Network::flatten(const NetworkGrad& grad) {
  Index n = 0;
  for (const auto& g : grad) n += g.weight.size() + g.bias.size();
  Vector flat(n);
  Index pos = 0;
  for (const auto& g : grad) {
    flat.segment(pos, g.weight.size()) = g.weight.reshaped();
    pos += g.weight.size();
    flat.segment(pos, g.bias.size()) = g.bias;
    pos += g.bias.size();
  }
  return flat;
}

bool Network::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

nlohmann::json Network::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& layer : layers_) {
    arr.push_back({{"activation", to_string(layer.act)},
                   {"weight", matrix_to_json(layer.weight)},
                   {"bias", vector_to_json(layer.bias)}});
  }
  return arr;
}

Network Network::from_json(const nlohmann::json& j) {
  std::vector<Layer> layers;
  for (const auto& lj : j) {
    Layer layer;
    layer.act = parse_activation(lj.at("activation").get<std::string>());
    layer.weight = matrix_from_json(lj.at("weight"));
    layer.bias = vector_from_json(lj.at("bias"));
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

Adam::Adam(Index n_params, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps),
      m_(Vector::Zero(n_params)), v_(Vector::Zero(n_params)) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols) throw DataError("matrix block size mismatch");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

}  // namespace specsize
