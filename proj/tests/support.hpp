#pragma once

#include <cmath>
#include <functional>

#include "sweepnet/common.hpp"
#include "sweepnet/tensor.hpp"

namespace testsupport {

using sweepnet::Rng;
using sweepnet::Tensor;

inline Tensor<double> random_tensor(std::vector<int> shape, Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Central finite difference of a scalar-valued function w.r.t. one tensor
/// entry.
inline double central_diff(const std::function<double()>& eval, double& slot,
                           double eps) {
  const double saved = slot;
  slot = saved + eps;
  const double hi = eval();
  slot = saved - eps;
  const double lo = eval();
  slot = saved;
  return (hi - lo) / (2.0 * eps);
}

/// Max relative error between an analytic gradient and finite differences
/// over every entry of `param`, where `eval` recomputes the scalar loss.
inline double gradient_max_rel_error(Tensor<double>& param,
                                     const Tensor<double>& analytic,
                                     const std::function<double()>& eval,
                                     double eps = 1e-5) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < param.size(); ++i) {
    const double numeric = central_diff(eval, param[i], eps);
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace testsupport
