#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "kshape/errors.hpp"

namespace kshape {

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
};

/// One bias-corrected Adam update of every tensor in `params`. Moment
/// accumulators are created (zeroed) on the first call.
inline void adam_step(const std::vector<Eigen::MatrixXd*>& params,
                      const std::vector<Eigen::MatrixXd>& grads, AdamState& state) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter and gradient counts differ");
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto* p : params) {
      state.first_moment.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = *params[k];
    if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols() ||
        state.first_moment[k].rows() != p.rows() || state.first_moment[k].cols() != p.cols()) {
      throw DimensionError("adam_step: tensor shape mismatch");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[k];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[k].cwiseProduct(grads[k]);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[k]->array() -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
  }
}

}  // namespace kshape
