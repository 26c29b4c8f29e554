#include <cmath>
#include <limits>
#include <sstream>

#include "specsize/metrics.hpp"
#include "specsize/regressors.hpp"

namespace specsize {

nlohmann::json ParamRange::draw(Rng& rng) const {
  switch (kind) {
    case Kind::uniform: return rng.uniform(lo, hi);
    case Kind::log_uniform: return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    case Kind::integer: {
      const auto a = static_cast<long long>(lo), b = static_cast<long long>(hi);
      return a + static_cast<long long>(rng.below(static_cast<std::size_t>(b - a + 1)));
    }
    case Kind::choice: return choices[rng.below(choices.size())];
  }
  return nullptr;
}

ParamRange ParamRange::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1)
    throw ConfigError("search range must be an object with a single key");
  ParamRange r;
  const std::string key = j.begin().key();
  const nlohmann::json& val = j.begin().value();
  if (key == "choice") {
    if (!val.is_array() || val.empty()) throw ConfigError("search choice needs a non-empty array");
    r.kind = Kind::choice;
    r.choices.assign(val.begin(), val.end());
    return r;
  }
  if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number())
    throw ConfigError("search range '" + key + "' needs [lo, hi]");
  r.lo = val[0].get<double>();
  r.hi = val[1].get<double>();
  if (key == "uniform") {
    r.kind = Kind::uniform;
  } else if (key == "log_uniform") {
    r.kind = Kind::log_uniform;
    if (!(r.lo > 0.0)) throw ConfigError("log_uniform range needs lo > 0");
  } else if (key == "int") {
    r.kind = Kind::integer;
    if (r.lo != std::floor(r.lo) || r.hi != std::floor(r.hi))
      throw ConfigError("int range bounds must be integers");
  } else {
    throw ConfigError("unknown search range kind: " + key);
  }
  if (!(r.lo <= r.hi)) throw ConfigError("search range '" + key + "' has lo > hi");
  return r;
}

void SearchSpec::validate() const {
  if (n_draws < 1) throw ConfigError("search: n_draws must be >= 1");
  if (folds < 2) throw ConfigError("search: folds must be >= 2");
}

SearchSpec SearchSpec::from_json(const nlohmann::json& j) {
  SearchSpec s;
  try {
    s.n_draws = j.value("n_draws", s.n_draws);
    s.folds = j.value("folds", s.folds);
    s.seed = j.value("seed", s.seed);
    if (j.contains("params")) {
      for (const auto& [name, range] : j.at("params").items())
        s.params.emplace(name, ParamRange::from_json(range));
    }
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("search spec: ") + e.what());
  }
  s.validate();
  return s;
}

SearchResult random_search(const FitPredictFn& fit_predict, const SearchSpec& search,
                           const Matrix& x, const Matrix& y) {
  search.validate();
  if (x.rows() != y.rows()) throw DataError("search: X rows do not match y length");
  if (x.rows() < search.folds) throw DataError("search: fewer samples than folds");
  const auto folds = kfold_indices(x.rows(), search.folds, search.seed);
  Rng rng(search.seed);

  SearchResult result;
  result.best_cv_mse = std::numeric_limits<double>::infinity();
  for (Index d = 0; d < search.n_draws; ++d) {
    SearchRow row;
    row.draw_id = d;
    row.params = nlohmann::json::object();
    for (const auto& [name, range] : search.params) row.params[name] = range.draw(rng);
    double sse = 0.0;
    try {
      for (const auto& f : folds) {
        const Matrix pred =
            fit_predict(take_rows(x, f.train), take_rows(y, f.train), take_rows(x, f.validation), row.params);
        sse += (pred - take_rows(y, f.validation)).squaredNorm();
      }
      row.cv_mse = sse / static_cast<double>(y.size());
      if (!std::isfinite(row.cv_mse)) row.cv_mse = std::numeric_limits<double>::infinity();
    } catch (const NumericError&) {
      row.cv_mse = std::numeric_limits<double>::infinity();
    }
    if (row.cv_mse < result.best_cv_mse) {
      result.best_cv_mse = row.cv_mse;
      result.best_params = row.params;
    }
    result.table.push_back(std::move(row));
  }
  if (!std::isfinite(result.best_cv_mse)) throw NumericError("search: every draw diverged");
  return result;
}

std::string search_table_csv(const SearchResult& result) {
  std::ostringstream out;
  out << "draw_id,params_json,cv_mse\n";
  for (const auto& row : result.table) {
    std::string quoted;
    for (char c : row.params.dump()) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    out << row.draw_id << ",\"" << quoted << "\","
        << (std::isfinite(row.cv_mse) ? format_double(row.cv_mse) : std::string("inf")) << "\n";
  }
  return out.str();
}

}  // namespace specsize
