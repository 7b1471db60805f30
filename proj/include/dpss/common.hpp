#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpss {

// Row-major so that one row holds one time frame.
template <typename T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Tensor<double>;

// Raised for malformed inputs, broken invariants and numerical breakdowns.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace dpss
