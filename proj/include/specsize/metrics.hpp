#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specsize/spectra.hpp"

namespace specsize {

struct Metrics {
  double r2 = 0.0;
  double rmse = 0.0;   // nm
  double mape = 0.0;   // percent, mean of |percent error|
  Vector percent_errors;  // signed, 100 * (pred - actual) / actual
};

/// R^2 is 1 for a perfect fit; when the actual values have zero spread and
/// the fit is imperfect it is -infinity (serialized as null).
Metrics compute_metrics(const Vector& predicted, const Vector& actual);

/// `{r2, rmse_nm, mape_pct, percent_errors: {id: value}}`
nlohmann::json metrics_to_json(const Metrics& m, const std::vector<std::string>& ids);

std::pair<SpectraSet, SpectraSet> train_test_split(const SpectraSet& set, Index n_test,
                                                   std::uint64_t seed);
/// Index form of train_test_split: (train, test), each sorted ascending.
std::pair<IndexList, IndexList> split_indices(Index n, Index n_test, std::uint64_t seed);

struct Fold {
  IndexList train;
  IndexList validation;
};
std::vector<Fold> kfold_indices(Index n, Index k, std::uint64_t seed);

}  // namespace specsize
