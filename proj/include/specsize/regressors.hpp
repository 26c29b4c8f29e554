#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "specsize/network.hpp"
#include "specsize/pretreat.hpp"

namespace specsize {

// ---------------------------------------------------------------------------
// Standardization for network training

/// Column mean and sample sd. Constant columns keep sd = 0: standardize
/// divides them by 1 and destandardize maps every output back to the mean.
ColumnScaler fit_standardizer(const Matrix& m);
Matrix standardize(const ColumnScaler& s, const Matrix& m);
Matrix destandardize(const ColumnScaler& s, const Matrix& m);

// ---------------------------------------------------------------------------
// Feed-forward network regressor

struct MlpSpec {
  std::vector<Index> hidden{32, 32};
  Activation activation = Activation::tanh;
  double learning_rate = 1e-3;
  Index epochs = 500;
  Index batch_size = 16;
  double l2 = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static MlpSpec from_json(const nlohmann::json& j);
  static MlpSpec from_json(const nlohmann::json& j, const MlpSpec& defaults);
};

struct MlpModel {
  MlpSpec spec;
  Network net;
  ColumnScaler x_scale;
  ColumnScaler y_scale;
  std::vector<double> loss_history;  // per-epoch training MSE in standardized units
};

/// Mini-batch Adam on the mean squared error of standardized targets.
/// Throws NumericError naming the epoch when the loss stops being finite.
MlpModel mlp_fit(const Matrix& x, const Matrix& y, const MlpSpec& spec);
Matrix mlp_predict(const MlpModel& model, const Matrix& x);

/// Loss and flat gradient of the standardized-space MSE (+ L2 on weights).
double mlp_loss_gradient(const Network& net, const Matrix& xs, const Matrix& ys, double l2,
                         Vector* grad);

/// Relative error with a floor: |a - f| / max(|a|, |f|, floor), where
/// floor = max(floor_scale * max_k |a_k|, kGradientAbsoluteFloor).
inline constexpr double kGradientAbsoluteFloor = 1e-8;
double gradient_relative_error(const Vector& analytic, const Vector& numeric,
                               double floor_scale = 1e-3);

/// Central finite differences (h = 1e-6) against the analytic gradient of
/// the training loss over every parameter. Returns the max relative error.
double mlp_grad_check(const MlpModel& model, const Matrix& x, const Matrix& y);

nlohmann::json mlp_to_json(const MlpModel& m);
MlpModel mlp_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees (squared error, second-order leaves)

struct GbtSpec {
  Index n_trees = 100;
  Index max_depth = 3;
  double learning_rate = 0.1;
  Index min_samples_leaf = 1;
  double lambda = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static GbtSpec from_json(const nlohmann::json& j);
  static GbtSpec from_json(const nlohmann::json& j, const GbtSpec& defaults);
};

struct TreeNode {
  Index feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  Index left = -1;
  Index right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Index depth() const;
};

struct GbtModel {
  GbtSpec spec;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  std::vector<double> train_mse;  // after each round; entry 0 is the base score
};

GbtModel gbt_fit(const Matrix& x, const Vector& y, const GbtSpec& spec);
Vector gbt_predict(const GbtModel& model, const Matrix& x);

/// One booster per target column.
std::vector<GbtModel> gbt_fit_multi(const Matrix& x, const Matrix& y, const GbtSpec& spec);
Matrix gbt_predict_multi(const std::vector<GbtModel>& models, const Matrix& x);

nlohmann::json gbt_to_json(const GbtModel& m);
GbtModel gbt_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Partial least squares (NIPALS, X deflation only)

struct PlsModel {
  Index n_components = 0;
  Vector x_mean;
  Vector y_mean;
  Matrix weights;       // W, p x A
  Matrix x_loadings;    // P, p x A
  Matrix y_loadings;    // Q, q x A
  Matrix scores;        // T, n x A
  Matrix coefficients;  // B, p x q
};

PlsModel pls_fit(const Matrix& x, const Matrix& y, Index n_components);
Matrix pls_predict(const PlsModel& model, const Matrix& x);

/// Component count minimizing mean k-fold CV MSE; ties go to fewer
/// components. Counts that exceed the rank of a training fold are skipped.
struct PlsChoice {
  Index n_components = 0;
  std::vector<double> cv_mse;  // entry k-1 for k components
};
PlsChoice pls_choose_components(const Matrix& x, const Matrix& y, Index k_max, Index folds,
                                std::uint64_t seed);

nlohmann::json pls_to_json(const PlsModel& m);
PlsModel pls_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Randomized hyper-parameter search

struct ParamRange {
  enum class Kind { uniform, log_uniform, integer, choice };
  Kind kind = Kind::uniform;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<nlohmann::json> choices;

  nlohmann::json draw(Rng& rng) const;
  static ParamRange from_json(const nlohmann::json& j);
};

struct SearchSpec {
  std::map<std::string, ParamRange> params;
  Index n_draws = 10;
  Index folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
  static SearchSpec from_json(const nlohmann::json& j);
};

/// Fits on (x_train, y_train) with the drawn params and predicts x_val.
using FitPredictFn = std::function<Matrix(const Matrix& x_train, const Matrix& y_train,
                                          const Matrix& x_val, const nlohmann::json& params)>;

struct SearchRow {
  Index draw_id = 0;
  nlohmann::json params;
  double cv_mse = 0.0;  // +inf when the draw diverged
};

struct SearchResult {
  nlohmann::json best_params;
  double best_cv_mse = 0.0;
  std::vector<SearchRow> table;
};

SearchResult random_search(const FitPredictFn& fit_predict, const SearchSpec& search,
                           const Matrix& x, const Matrix& y);
/// `draw_id,params_json,cv_mse`
std::string search_table_csv(const SearchResult& result);

}  // namespace specsize
