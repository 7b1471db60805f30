#pragma once

// Central finite differences over named graph inputs, used as the independent
// oracle for reverse-mode gradients.

#include "dpss/diffgraph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dpss::testing {

// f maps the (perturbed) tensor to a scalar.
inline Matrix central_difference(const std::function<double(const Matrix&)>& f, const Matrix& at,
                                 double step = 1e-5) {
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + step;
    const double up = f(probe);
    probe.data()[i] = orig - step;
    const double down = f(probe);
    probe.data()[i] = orig;
    grad.data()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Largest elementwise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

}  // namespace dpss::testing
