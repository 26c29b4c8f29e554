#include "specsize/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace specsize {

Metrics compute_metrics(const Vector& predicted, const Vector& actual) {
  if (predicted.size() != actual.size()) throw DataError("metrics: length mismatch");
  if (actual.size() < 1) throw DataError("metrics: need at least one sample");
  for (Index i = 0; i < actual.size(); ++i) {
    if (actual(i) == 0.0) throw DataError("metrics: actual value is zero");
  }
  const double n = static_cast<double>(actual.size());
  Metrics m;
  m.percent_errors = 100.0 * (predicted - actual).array() / actual.array();
  m.mape = m.percent_errors.array().abs().sum() / n;
  const double ss_res = (predicted - actual).squaredNorm();
  m.rmse = std::sqrt(ss_res / n);
  const double ss_tot = (actual.array() - actual.mean()).square().sum();
  if (ss_res == 0.0) {
    m.r2 = 1.0;
  } else if (ss_tot == 0.0) {
    m.r2 = -std::numeric_limits<double>::infinity();
  } else {
    m.r2 = 1.0 - ss_res / ss_tot;
  }
  return m;
}

nlohmann::json metrics_to_json(const Metrics& m, const std::vector<std::string>& ids) {
  if (static_cast<Index>(ids.size()) != m.percent_errors.size())
    throw DataError("metrics: id count does not match evaluated samples");
  nlohmann::json pe = nlohmann::json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) pe[ids[i]] = m.percent_errors(static_cast<Index>(i));
  nlohmann::json j;
  j["r2"] = m.r2;
  j["rmse_nm"] = m.rmse;
  j["mape_pct"] = m.mape;
  j["percent_errors"] = std::move(pe);
  return j;
}

std::pair<IndexList, IndexList> split_indices(Index n, Index n_test, std::uint64_t seed) {
  if (n_test <= 0 || n_test >= n) throw ConfigError("n_test must satisfy 0 < n_test < n_samples");
  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  IndexList test(order.begin(), order.begin() + n_test);
  IndexList train(order.begin() + n_test, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

std::pair<SpectraSet, SpectraSet> train_test_split(const SpectraSet& set, Index n_test,
                                                   std::uint64_t seed) {
  auto [train, test] = split_indices(set.n_samples(), n_test, seed);
  return {set.subset(train), set.subset(test)};
}

std::vector<Fold> kfold_indices(Index n, Index k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ConfigError("k-fold: k must satisfy 2 <= k <= n");
  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const Index base = n / k;
  const Index extra = n % k;
  Index pos = 0;
  for (Index f = 0; f < k; ++f) {
    const Index len = base + (f < extra ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.validation.assign(order.begin() + pos, order.begin() + pos + len);
    std::sort(fold.validation.begin(), fold.validation.end());
    pos += len;
  }
  for (auto& fold : folds) {
    std::vector<bool> in_val(static_cast<std::size_t>(n), false);
    for (Index i : fold.validation) in_val[static_cast<std::size_t>(i)] = true;
    for (Index i = 0; i < n; ++i) {
      if (!in_val[static_cast<std::size_t>(i)]) fold.train.push_back(i);
    }
  }
  return folds;
}

}  // namespace specsize
