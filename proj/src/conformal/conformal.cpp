#include "specsize/conformal.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "specsize/regressors.hpp"
#include "specsize/spectra.hpp"

namespace specsize {

namespace {

constexpr double kZeroRow = 1e-12;

Vector input_scale(const ColumnScaler& s) {
  Vector inv(s.sd.size());
  for (Index c = 0; c < inv.size(); ++c) inv(c) = s.sd(c) > 0.0 ? 1.0 / s.sd(c) : 1.0;
  return inv;
}

struct JacobianTrace {
  std::vector<Matrix> jin;  // Jacobian entering each layer
  std::vector<Matrix> a;    // W_l * jin_l
  Matrix out;
};

JacobianTrace forward_jacobian(const Network& net, const std::vector<Vector>& pre, const Matrix& j0) {
  JacobianTrace t;
  Matrix j = j0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    t.jin.push_back(j);
    Matrix a = layer.weight * j;
    const Vector s = pre[l].unaryExpr([&](double v) { return activate_d1(layer.act, v); });
    j = s.asDiagonal() * a;
    t.a.push_back(std::move(a));
  }
  t.out = std::move(j);
  return t;
}

std::vector<Vector> sample_pre(const Network::Cache& cache, Index row) {
  std::vector<Vector> pre;
  for (const auto& z : cache.pre) pre.push_back(z.row(row).transpose());
  return pre;
}

// Sum over pairs of squared normalized inner products, with dValue/dJ in grad_j.
double pair_penalty(const Matrix& j, Matrix* grad_j) {
  const Index m = j.rows();
  const Vector norms = j.rowwise().norm();
  double value = 0.0;
  if (grad_j) grad_j->setZero(j.rows(), j.cols());
  for (Index a = 0; a < m; ++a) {
    if (norms(a) < kZeroRow) continue;
    for (Index b = a + 1; b < m; ++b) {
      if (norms(b) < kZeroRow) continue;
      const double c = j.row(a).dot(j.row(b)) / (norms(a) * norms(b));
      value += c * c;
      if (grad_j) {
        const double g = 2.0 * c;
        grad_j->row(a) += g * (j.row(b) / (norms(a) * norms(b)) - c * j.row(a) / (norms(a) * norms(a)));
        grad_j->row(b) += g * (j.row(a) / (norms(a) * norms(b)) - c * j.row(b) / (norms(b) * norms(b)));
      }
    }
  }
  return value;
}

// Second-order backward pass of a scalar function of the input Jacobian.
void jacobian_backward(const Network& net, const std::vector<Vector>& pre,
                       const std::vector<Vector>& inputs, const JacobianTrace& trace, Matrix g,
                       NetworkGrad& grad) {
  Vector dh = Vector::Zero(net.output_dim());
  for (std::size_t l = net.layers().size(); l-- > 0;) {
    const auto& layer = net.layers()[l];
    const Vector s = pre[l].unaryExpr([&](double v) { return activate_d1(layer.act, v); });
    const Vector s2 = pre[l].unaryExpr([&](double v) { return activate_d2(layer.act, v); });
    const Matrix da = s.asDiagonal() * g;
    const Vector ds = g.cwiseProduct(trace.a[l]).rowwise().sum();
    const Vector dz = dh.cwiseProduct(s) + ds.cwiseProduct(s2);
    grad[l].weight.noalias() += da * trace.jin[l].transpose() + dz * inputs[l].transpose();
    grad[l].bias += dz;
    dh = layer.weight.transpose() * dz;
    g = layer.weight.transpose() * da;
  }
}

std::vector<Index> chain(Index in, const std::vector<Index>& hidden, Index out) {
  std::vector<Index> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

void YShapedSpec::validate() const {
  if (latent_dim < 2) throw ConfigError("yshaped: latent dimension must be >= 2");
  for (const auto* widths : {&encoder_hidden, &decoder_hidden, &head_hidden})
    for (Index w : *widths)
      if (w < 1) throw ConfigError("yshaped: hidden widths must be positive");
  if (!(w_recon >= 0.0 && w_orth >= 0.0)) throw ConfigError("yshaped: loss weights must be >= 0");
  if (!(w_pred > 0.0)) throw ConfigError("yshaped: w_pred must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("yshaped: learning_rate must be positive");
  if (epochs < 1 || batch_size < 1) throw ConfigError("yshaped: epochs and batch_size must be >= 1");
  if (prediction_latent < 1 || prediction_latent > latent_dim)
    throw ConfigError("yshaped: prediction_latent must be in [1, latent_dim]");
}

nlohmann::json YShapedSpec::to_json() const {
  return {{"latent_dim", latent_dim},       {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden}, {"head_hidden", head_hidden},
          {"activation", to_string(activation)}, {"w_recon", w_recon},
          {"w_pred", w_pred},               {"w_orth", w_orth},
          {"learning_rate", learning_rate}, {"epochs", epochs},
          {"batch_size", batch_size},       {"seed", seed},
          {"prediction_latent", prediction_latent}};
}

YShapedSpec YShapedSpec::from_json(const nlohmann::json& j) {
  YShapedSpec s;
  try {
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    if (j.contains("encoder_hidden")) s.encoder_hidden = j.at("encoder_hidden").get<std::vector<Index>>();
    if (j.contains("decoder_hidden")) s.decoder_hidden = j.at("decoder_hidden").get<std::vector<Index>>();
    if (j.contains("head_hidden")) s.head_hidden = j.at("head_hidden").get<std::vector<Index>>();
    if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
    s.w_recon = j.value("w_recon", s.w_recon);
    s.w_pred = j.value("w_pred", s.w_pred);
    s.w_orth = j.value("w_orth", s.w_orth);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.seed = j.value("seed", s.seed);
    s.prediction_latent = j.value("prediction_latent", s.prediction_latent);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("yshaped spec: ") + e.what());
  }
  s.validate();
  return s;
}

Vector YShapedModel::parameters() const {
  const Vector e = encoder.parameters(), d = decoder.parameters(), h = head.parameters();
  Vector flat(e.size() + d.size() + h.size());
  flat << e, d, h;
  return flat;
}

void YShapedModel::set_parameters(const Vector& flat) {
  const Index ne = encoder.parameter_count(), nd = decoder.parameter_count(),
              nh = head.parameter_count();
  if (flat.size() != ne + nd + nh) throw DataError("yshaped: parameter vector length mismatch");
  encoder.set_parameters(flat.segment(0, ne));
  decoder.set_parameters(flat.segment(ne, nd));
  head.set_parameters(flat.segment(ne + nd, nh));
}

YShapedModel yae_init(const Matrix& phi, const Vector& sizes, const YShapedSpec& spec) {
  spec.validate();
  if (phi.rows() != sizes.size()) throw DataError("yshaped: phi rows do not match sizes");
  if (phi.rows() < 2 || phi.cols() < 1) throw DataError("yshaped: need at least 2 samples");
  if (!phi.allFinite() || !sizes.allFinite()) throw DataError("yshaped: non-finite training data");
  YShapedModel m;
  m.spec = spec;
  m.phi_scale = fit_standardizer(phi);
  m.size_scale = fit_standardizer(sizes);
  Rng rng(spec.seed);
  const Index d = phi.cols(), k = spec.latent_dim;
  m.encoder = Network::glorot(chain(d, spec.encoder_hidden, k), spec.activation, Activation::identity, rng);
  m.decoder = Network::glorot(chain(k, spec.decoder_hidden, d), spec.activation, Activation::identity, rng);
  m.head = Network::glorot(chain(1, spec.head_hidden, 1), spec.activation, Activation::identity, rng);
  return m;
}

YaeLoss yae_loss(const YShapedModel& model, const Matrix& phi, const Vector& sizes, Vector* grad) {
  if (phi.cols() != model.input_dim()) throw DataError("yshaped: input dimension mismatch");
  if (phi.rows() != sizes.size()) throw DataError("yshaped: phi rows do not match sizes");
  const auto& spec = model.spec;
  const Matrix xs = standardize(model.phi_scale, phi);
  const Matrix ys = standardize(model.size_scale, sizes);
  const Index n = xs.rows(), d = xs.cols(), k = model.latent_index();
  const double bn = static_cast<double>(n);

  Network::Cache ec, dc, hc;
  const Matrix nu = model.encoder.forward(xs, ec);
  const Matrix xhat = model.decoder.forward(nu, dc);
  const Matrix yhat = model.head.forward(nu.col(k), hc);

  YaeLoss loss;
  loss.recon = (xhat - xs).squaredNorm() / (bn * static_cast<double>(d));
  loss.pred = (yhat - ys).squaredNorm() / bn;

  NetworkGrad ge, gd, gh;
  if (grad) {
    ge = model.encoder.zero_grad();
    gd = model.decoder.zero_grad();
    gh = model.head.zero_grad();
    Matrix dnu = model.decoder.backward(dc, (2.0 * spec.w_recon / (bn * static_cast<double>(d))) * (xhat - xs), gd);
    dnu.col(k) += model.head.backward(hc, (2.0 * spec.w_pred / bn) * (yhat - ys), gh).col(0);
    model.encoder.backward(ec, dnu, ge);
  }

  const Matrix j0 = input_scale(model.phi_scale).asDiagonal();
  const bool need_orth_grad = grad && spec.w_orth > 0.0;
  Matrix gj;
  for (Index b = 0; b < n; ++b) {
    const auto pre = sample_pre(ec, b);
    const auto trace = forward_jacobian(model.encoder, pre, j0);
    loss.orth += pair_penalty(trace.out, need_orth_grad ? &gj : nullptr) / bn;
    if (need_orth_grad) {
      std::vector<Vector> inputs;
      for (const auto& h : ec.inputs) inputs.push_back(h.row(b).transpose());
      jacobian_backward(model.encoder, pre, inputs, trace, (spec.w_orth / bn) * gj, ge);
    }
  }
  loss.total = spec.w_recon * loss.recon + spec.w_pred * loss.pred + spec.w_orth * loss.orth;

  if (grad) {
    const Vector e = Network::flatten(ge), dv = Network::flatten(gd), h = Network::flatten(gh);
    grad->resize(e.size() + dv.size() + h.size());
    *grad << e, dv, h;
  }
  return loss;
}

YShapedModel yae_fit(const Matrix& phi, const Vector& sizes, const YShapedSpec& spec) {
  YShapedModel model = yae_init(phi, sizes, spec);
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam opt(model.parameters().size(), spec.learning_rate);
  Vector params = model.parameters();
  Vector grad;
  IndexList order(static_cast<std::size_t>(phi.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch = std::min(spec.batch_size, phi.rows());

  for (Index epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(order);
    for (Index start = 0; start < phi.rows(); start += batch) {
      const Index len = std::min(batch, phi.rows() - start);
      const IndexList idx(order.begin() + start, order.begin() + start + len);
      yae_loss(model, take_rows(phi, idx), take(sizes, idx), &grad);
      opt.step(params, grad);
      model.set_parameters(params);
    }
    const YaeLoss l = yae_loss(model, phi, sizes, nullptr);
    if (!std::isfinite(l.total) || !params.allFinite())
      throw NumericError("yshaped: training diverged at epoch " + std::to_string(epoch + 1));
    model.loss_history.push_back(l);
  }
  return model;
}

double yae_grad_check(const YShapedModel& model, const Matrix& phi, const Vector& sizes) {
  Vector analytic;
  yae_loss(model, phi, sizes, &analytic);
  YShapedModel probe = model;
  const Vector theta = model.parameters();
  Vector t = theta, numeric(theta.size());
  constexpr double h = 1e-6;
  for (Index i = 0; i < theta.size(); ++i) {
    t(i) = theta(i) + h;
    probe.set_parameters(t);
    const double up = yae_loss(probe, phi, sizes, nullptr).total;
    t(i) = theta(i) - h;
    probe.set_parameters(t);
    const double down = yae_loss(probe, phi, sizes, nullptr).total;
    t(i) = theta(i);
    numeric(i) = (up - down) / (2.0 * h);
  }
  return gradient_relative_error(analytic, numeric);
}

Matrix encode(const YShapedModel& model, const Matrix& phi) {
  if (phi.cols() != model.input_dim()) throw DataError("yshaped: input dimension mismatch");
  return model.encoder.forward(standardize(model.phi_scale, phi));
}

Matrix decode(const YShapedModel& model, const Matrix& nu) {
  if (nu.cols() != model.spec.latent_dim) throw DataError("yshaped: latent dimension mismatch");
  return destandardize(model.phi_scale, model.decoder.forward(nu));
}

Vector head_predict(const YShapedModel& model, const Vector& nu_k) {
  return destandardize(model.size_scale, model.head.forward(nu_k)).col(0);
}

Vector predict_size(const YShapedModel& model, const Matrix& phi) {
  return head_predict(model, encode(model, phi).col(model.latent_index()));
}

Matrix network_jacobian(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim()) throw DataError("jacobian: input dimension mismatch");
  Network::Cache cache;
  net.forward(x.transpose(), cache);
  return forward_jacobian(net, sample_pre(cache, 0), Matrix::Identity(x.size(), x.size())).out;
}

Matrix encoder_jacobian(const YShapedModel& model, const Vector& phi) {
  if (phi.size() != model.input_dim()) throw DataError("yshaped: input dimension mismatch");
  const Vector xs = standardize(model.phi_scale, phi.transpose()).row(0).transpose();
  return network_jacobian(model.encoder, xs) * input_scale(model.phi_scale).asDiagonal();
}

double jacobian_orthogonality(const Matrix& jac, Index* excluded) {
  const Vector norms = jac.rowwise().norm();
  double sum = 0.0;
  Index count = 0;
  for (Index a = 0; a < jac.rows(); ++a) {
    if (norms(a) < kZeroRow) {
      if (excluded) ++*excluded;
      continue;
    }
    for (Index b = a + 1; b < jac.rows(); ++b) {
      if (norms(b) < kZeroRow) continue;
      sum += std::abs(jac.row(a).dot(jac.row(b))) / (norms(a) * norms(b));
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

OrthogonalityScore orthogonality_score(const YShapedModel& model, const Matrix& phi) {
  if (phi.rows() < 1) throw DataError("orthogonality score needs at least one sample");
  OrthogonalityScore out;
  double total = 0.0;
  for (Index i = 0; i < phi.rows(); ++i)
    total += jacobian_orthogonality(encoder_jacobian(model, phi.row(i).transpose()), &out.excluded_rows);
  out.score = total / static_cast<double>(phi.rows());
  return out;
}

nlohmann::json yae_to_json(const YShapedModel& m) {
  return {{"format", "specsize.yshaped"},
          {"version", 1},
          {"spec", m.spec.to_json()},
          {"phi_mean", vector_to_json(m.phi_scale.mean)},
          {"phi_sd", vector_to_json(m.phi_scale.sd)},
          {"size_mean", vector_to_json(m.size_scale.mean)},
          {"size_sd", vector_to_json(m.size_scale.sd)},
          {"encoder", m.encoder.to_json()},
          {"decoder", m.decoder.to_json()},
          {"head", m.head.to_json()}};
}

YShapedModel yae_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "specsize.yshaped" || j.value("version", 0) != 1)
    throw DataError("yshaped model: unsupported format or version");
  YShapedModel m;
  m.spec = YShapedSpec::from_json(j.at("spec"));
  m.phi_scale = {vector_from_json(j.at("phi_mean")), vector_from_json(j.at("phi_sd"))};
  m.size_scale = {vector_from_json(j.at("size_mean")), vector_from_json(j.at("size_sd"))};
  m.encoder = Network::from_json(j.at("encoder"));
  m.decoder = Network::from_json(j.at("decoder"));
  m.head = Network::from_json(j.at("head"));
  return m;
}

std::string loss_history_csv(const std::vector<YaeLoss>& history) {
  std::ostringstream out;
  out << "epoch,recon,pred,orth,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& l = history[e];
    out << e + 1 << ',' << format_double(l.recon) << ',' << format_double(l.pred) << ','
        << format_double(l.orth) << ',' << format_double(l.total) << '\n';
  }
  return out.str();
}

}  // namespace specsize
