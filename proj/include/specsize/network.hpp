#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specsize/common.hpp"

namespace specsize {

enum class Activation { identity, tanh, relu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

double activate(Activation a, double z);
double activate_d1(Activation a, double z);
double activate_d2(Activation a, double z);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation act = Activation::identity;
};

struct LayerGrad {
  Matrix weight;
  Vector bias;
};
using NetworkGrad = std::vector<LayerGrad>;

/// Fully connected feed-forward network. Batches are row-major in the
/// sample sense: one sample per row.
class Network {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer (batch x in)
    std::vector<Matrix> pre;     // pre-activations (batch x out)
  };

  Network() = default;
  explicit Network(std::vector<Layer> layers);

  /// Glorot-uniform weights, zero biases. `widths` includes input and output.
  static Network glorot(const std::vector<Index>& widths, Activation hidden, Activation output,
                        Rng& rng);

  Index input_dim() const;
  Index output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Cache& cache) const;

  /// Accumulates parameter gradients into `grad` (sized by zero_grad) and
  /// returns dL/dx for the batch.
  Matrix backward(const Cache& cache, const Matrix& grad_out, NetworkGrad& grad) const;

  NetworkGrad zero_grad() const;

  Index parameter_count() const;
  /// Flattening order: layer by layer, weight (column-major) then bias.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  static Vector flatten(const NetworkGrad& grad);

  bool all_finite() const;

  nlohmann::json to_json() const;
  static Network from_json(const nlohmann::json& j);

 private:
  std::vector<Layer> layers_;
};

/// Adam on a flat parameter vector.
class Adam {
 public:
  Adam(Index n_params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(Vector& params, const Vector& grad);

 private:
  double lr_, b1_, b2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace specsize
