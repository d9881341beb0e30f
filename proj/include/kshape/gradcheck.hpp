#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace kshape {

/// Central finite differences of the scalar `loss()` with respect to every
/// entry of `param`, which is perturbed in place and restored.
template <class Loss>
Eigen::MatrixXd numeric_gradient(Eigen::MatrixXd& param, Loss&& loss, double step = 1e-6) {
  Eigen::MatrixXd g(param.rows(), param.cols());
  for (Eigen::Index j = 0; j < param.cols(); ++j) {
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      const double saved = param(i, j);
      param(i, j) = saved + step;
      const double up = loss();
      param(i, j) = saved - step;
      const double down = loss();
      param(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

/// max |analytic - numeric| / max(max |numeric|, floor), i.e. the worst
/// entry error relative to the tensor's gradient scale.
inline double gradient_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                             double floor = 1e-8) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), floor);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace kshape
