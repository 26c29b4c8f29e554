#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specsize/network.hpp"
#include "specsize/pretreat.hpp"

namespace specsize {

struct YShapedSpec {
  Index latent_dim = 6;
  std::vector<Index> encoder_hidden{32, 32};
  std::vector<Index> decoder_hidden{32, 32};
  std::vector<Index> head_hidden{16};
  Activation activation = Activation::tanh;
  double w_recon = 1.0;
  double w_pred = 1.0;
  double w_orth = 0.1;
  double learning_rate = 1e-3;
  Index epochs = 300;
  Index batch_size = 16;
  std::uint64_t seed = 0;
  Index prediction_latent = 1;  // 1-based: nu_1 feeds the size head

  void validate() const;
  nlohmann::json to_json() const;
  static YShapedSpec from_json(const nlohmann::json& j);
};

struct YaeLoss {
  double recon = 0.0;
  double pred = 0.0;
  double orth = 0.0;
  double total = 0.0;
};

/// Encoder phi -> nu, decoder nu -> phi_hat, size head nu_k -> D_H.
/// Networks operate on standardized phi and sizes.
struct YShapedModel {
  YShapedSpec spec;
  Network encoder;
  Network decoder;
  Network head;
  ColumnScaler phi_scale;
  ColumnScaler size_scale;
  std::vector<YaeLoss> loss_history;

  Index input_dim() const { return encoder.input_dim(); }
  Index latent_index() const { return spec.prediction_latent - 1; }

  /// Encoder, decoder, then head parameters.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
};

/// Untrained model with Glorot weights and the given standardization.
YShapedModel yae_init(const Matrix& phi, const Vector& sizes, const YShapedSpec& spec);

/// Joint Adam training of all three subnetworks.
/// Loss = w_recon * MSE(phi_hat, phi) + w_pred * MSE(size) +
///        w_orth * mean_batch sum_{i<j} c_ij^2,
/// where c_ij is the normalized inner product of rows i and j of the
/// encoder Jacobian with respect to raw phi.
YShapedModel yae_fit(const Matrix& phi, const Vector& sizes, const YShapedSpec& spec);

/// Loss on a batch of raw inputs and, if `grad` is given, its exact
/// gradient with respect to parameters().
YaeLoss yae_loss(const YShapedModel& model, const Matrix& phi, const Vector& sizes, Vector* grad);

/// Central finite differences (h = 1e-6) of the total loss against the
/// analytic gradient, max relative error with the same floor as the MLP check.
double yae_grad_check(const YShapedModel& model, const Matrix& phi, const Vector& sizes);

Matrix encode(const YShapedModel& model, const Matrix& phi);
Matrix decode(const YShapedModel& model, const Matrix& nu);
Vector predict_size(const YShapedModel& model, const Matrix& phi);
/// Size head applied to a column of nu_k values.
Vector head_predict(const YShapedModel& model, const Vector& nu_k);

/// Analytic d nu / d phi at one raw input point (latent x input).
Matrix encoder_jacobian(const YShapedModel& model, const Vector& phi);
/// Same computation for a bare network with unit input scaling.
Matrix network_jacobian(const Network& net, const Vector& x);

struct OrthogonalityScore {
  double score = 0.0;        // mean |c_ij| over samples and pairs i<j
  Index excluded_rows = 0;   // zero-norm Jacobian rows skipped
};
OrthogonalityScore orthogonality_score(const YShapedModel& model, const Matrix& phi);
/// Mean |c_ij| over pairs of rows of a single Jacobian, zero rows skipped.
double jacobian_orthogonality(const Matrix& jac, Index* excluded = nullptr);

nlohmann::json yae_to_json(const YShapedModel& model);
YShapedModel yae_from_json(const nlohmann::json& j);
/// `epoch,recon,pred,orth,total`
std::string loss_history_csv(const std::vector<YaeLoss>& history);

}  // namespace specsize
