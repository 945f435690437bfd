// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference utilities for gradient verification.

#include <Eigen/Core>
#include <cmath>
#include <functional>

namespace ddc::testsupport {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares an analytic gradient against central differences of `f` applied
/// coordinate-wise to `theta`. Relative error uses max(|a|,|n|,floor) as the
/// denominator so near-zero coordinates do not blow up the ratio.
inline GradCheckResult finite_difference_check(
    Eigen::Ref<Eigen::VectorXd> theta, const Eigen::VectorXd& analytic,
    const std::function<double()>& f, double step = 1e-4, double denom_floor = 1e-6) {
  GradCheckResult res;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta(i);
    theta(i) = saved + step;
    const double up = f();
    theta(i) = saved - step;
    const double down = f();
    theta(i) = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic(i)), denom_floor});
    const double rel = std::abs(numeric - analytic(i)) / denom;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_analytic = analytic(i);
      res.worst_numeric = numeric;
    }
  }
  return res;
}

}  // namespace ddc::testsupport
