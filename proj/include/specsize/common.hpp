#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace specsize {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

// Error hierarchy. The CLI maps ConfigError/DataError to exit code 2 and
// NumericError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Portable, seedable generator. Draws are defined in terms of raw 64-bit
/// outputs of mt19937_64 so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1), Box-Muller
  std::size_t below(std::size_t n);       // uniform integer in [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Select rows of a matrix in the given order.
Matrix take_rows(const Matrix& m, const IndexList& rows);
Vector take(const Vector& v, const IndexList& idx);
Matrix take_cols(const Matrix& m, const IndexList& cols);

bool all_finite(const Matrix& m);

/// Flip sign so the largest-magnitude entry (first one on ties) is positive.
void fix_sign(Eigen::Ref<Vector> v);

}  // namespace specsize
