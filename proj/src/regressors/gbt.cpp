#include <algorithm>
#include <cmath>
#include <numeric>

#include "specsize/regressors.hpp"

namespace specsize {

void GbtSpec::validate() const {
  if (n_trees < 1) throw ConfigError("gbt: n_trees must be >= 1");
  if (max_depth < 0) throw ConfigError("gbt: max_depth must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ConfigError("gbt: learning_rate must be in (0, 1]");
  if (min_samples_leaf < 1) throw ConfigError("gbt: min_samples_leaf must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("gbt: lambda must be >= 0");
}

nlohmann::json GbtSpec::to_json() const {
  return {{"n_trees", n_trees},     {"max_depth", max_depth},
          {"learning_rate", learning_rate}, {"min_samples_leaf", min_samples_leaf},
          {"lambda", lambda},       {"seed", seed}};
}

GbtSpec GbtSpec::from_json(const nlohmann::json& j) { return from_json(j, GbtSpec{}); }

GbtSpec GbtSpec::from_json(const nlohmann::json& j, const GbtSpec& defaults) {
  GbtSpec s = defaults;
  try {
    s.n_trees = j.value("n_trees", s.n_trees);
    s.max_depth = j.value("max_depth", s.max_depth);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.min_samples_leaf = j.value("min_samples_leaf", s.min_samples_leaf);
    s.lambda = j.value("lambda", s.lambda);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gbt spec: ") + e.what());
  }
  s.validate();
  return s;
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Index i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

Index RegressionTree::depth() const {
  std::vector<Index> d(nodes.size(), 0);
  Index best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct TreeBuilder {
  const Matrix& x;
  const Vector& grad;  // h_i == 1 for squared error
  const GbtSpec& spec;
  RegressionTree tree;

  double leaf_value(double g, double h) const { return -spec.learning_rate * g / (h + spec.lambda); }

  double score(double g, double h) const { return g * g / (h + spec.lambda); }

  Index build(IndexList idx, Index depth) {
    double g_sum = 0.0;
    for (Index i : idx) g_sum += grad(i);
    const double h_sum = static_cast<double>(idx.size());
    const Index node_id = static_cast<Index>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes.back().value = leaf_value(g_sum, h_sum);

    const Index n = static_cast<Index>(idx.size());
    if (depth >= spec.max_depth || n < 2 * spec.min_samples_leaf) return node_id;

    const double parent = score(g_sum, h_sum);
    double best_gain = 0.0;
    Index best_feature = -1;
    double best_threshold = 0.0;
    IndexList sorted = idx;
    for (Index f = 0; f < x.cols(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](Index a, Index b) { return x(a, f) < x(b, f); });
      double g_left = 0.0;
      for (Index s = 0; s + 1 < n; ++s) {
        g_left += grad(sorted[static_cast<std::size_t>(s)]);
        const Index n_left = s + 1;
        const double lo = x(sorted[static_cast<std::size_t>(s)], f);
        const double hi = x(sorted[static_cast<std::size_t>(s + 1)], f);
        if (!(lo < hi)) continue;
        if (n_left < spec.min_samples_leaf || n - n_left < spec.min_samples_leaf) continue;
        const double h_left = static_cast<double>(n_left);
        const double gain = 0.5 * (score(g_left, h_left) + score(g_sum - g_left, h_sum - h_left) - parent);
        if (gain > best_gain + 1e-12 * std::abs(parent)) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
          if (!(lo < best_threshold)) best_threshold = hi;
        }
      }
    }
    if (best_feature < 0) return node_id;

    IndexList left, right;
    for (Index i : idx) (x(i, best_feature) < best_threshold ? left : right).push_back(i);
    const Index l = build(std::move(left), depth + 1);
    const Index r = build(std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }
};

}  // namespace

GbtModel gbt_fit(const Matrix& x, const Vector& y, const GbtSpec& spec) {
  spec.validate();
  if (x.rows() != y.size()) throw DataError("gbt: X rows do not match y length");
  if (x.rows() < 2 || x.cols() < 1) throw DataError("gbt: empty feature matrix");
  if (!x.allFinite() || !y.allFinite()) throw DataError("gbt: non-finite training data");

  GbtModel model;
  model.spec = spec;
  model.base_score = y.mean();
  Vector pred = Vector::Constant(y.size(), model.base_score);
  model.train_mse.push_back((pred - y).squaredNorm() / static_cast<double>(y.size()));
  IndexList all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), Index{0});

  for (Index t = 0; t < spec.n_trees; ++t) {
    const Vector grad = pred - y;
    TreeBuilder builder{x, grad, spec, {}};
    builder.build(all, 0);
    for (Index i = 0; i < x.rows(); ++i) pred(i) += builder.tree.predict(x.row(i));
    model.trees.push_back(std::move(builder.tree));
    model.train_mse.push_back((pred - y).squaredNorm() / static_cast<double>(y.size()));
  }
  return model;
}

Vector gbt_predict(const GbtModel& model, const Matrix& x) {
  Vector out = Vector::Constant(x.rows(), model.base_score);
  for (const auto& tree : model.trees) {
    for (Index i = 0; i < x.rows(); ++i) out(i) += tree.predict(x.row(i));
  }
  return out;
}

std::vector<GbtModel> gbt_fit_multi(const Matrix& x, const Matrix& y, const GbtSpec& spec) {
  std::vector<GbtModel> models;
  for (Index c = 0; c < y.cols(); ++c) models.push_back(gbt_fit(x, y.col(c), spec));
  return models;
}

Matrix gbt_predict_multi(const std::vector<GbtModel>& models, const Matrix& x) {
  Matrix out(x.rows(), static_cast<Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) out.col(static_cast<Index>(c)) = gbt_predict(models[c], x);
  return out;
}

nlohmann::json gbt_to_json(const GbtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"format", "specsize.gbt"}, {"version", 1}, {"spec", m.spec.to_json()},
          {"base_score", m.base_score}, {"trees", trees}};
}

GbtModel gbt_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "specsize.gbt" || j.value("version", 0) != 1)
    throw DataError("gbt model: unsupported format or version");
  GbtModel m;
  m.spec = GbtSpec::from_json(j.at("spec"));
  m.base_score = j.at("base_score").get<double>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      t.nodes.push_back({nj.at(0).get<Index>(), nj.at(1).get<double>(), nj.at(2).get<Index>(),
                         nj.at(3).get<Index>(), nj.at(4).get<double>()});
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace specsize
