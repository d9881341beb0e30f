#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "kshape/layers/common.hpp"

namespace kshape {

/// logits = W x + b, applied row-wise to a batch x features matrix.
class DenseLayer {
 public:
  struct Gradients {
    Eigen::MatrixXd input;
    Eigen::MatrixXd weights;
    Eigen::MatrixXd bias;
  };

  DenseLayer(int features, int classes)
      : weights_(Eigen::MatrixXd::Zero(classes, features)), bias_(Eigen::MatrixXd::Zero(classes, 1)) {
    if (features < 1 || classes < 1) throw DimensionError("DenseLayer: sizes must be positive");
  }

  int features() const { return static_cast<int>(weights_.cols()); }
  int classes() const { return static_cast<int>(weights_.rows()); }
  Eigen::MatrixXd& weights() { return weights_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::MatrixXd& bias() { return bias_; }
  const Eigen::MatrixXd& bias() const { return bias_; }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(features()));
    rng.fill_uniform(weights_, bound);
    rng.fill_uniform(bias_, bound);
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != features()) throw DimensionError("DenseLayer: feature dimension mismatch");
    Eigen::MatrixXd y = x * weights_.transpose();
    y.rowwise() += bias_.col(0).transpose();
    return y;
  }

  Gradients backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& upstream) const {
    require_shape(upstream, x.rows(), classes(), "DenseLayer::backward");
    return {upstream * weights_, upstream.transpose() * x, upstream.colwise().sum().transpose()};
  }

 private:
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd bias_;
};

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // dL/dlogits, same shape as the logits
};

/// Mean softmax cross-entropy over the batch.
inline LossResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  const auto batch = logits.rows();
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DimensionError("softmax_cross_entropy: label count differs from batch size");
  }
  if (batch == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  const auto classes = logits.cols();
  LossResult r{0.0, Eigen::MatrixXd(batch, classes)};
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || y >= classes) {
      throw DomainError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
    Eigen::Index arg = 0;
    const double top = logits.row(b).maxCoeff(&arg);
    const Eigen::RowVectorXd e = (logits.row(b).array() - top).exp().matrix();
    // e(arg) == 1; log1p keeps precision when the other terms are tiny.
    double rest = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      if (k != arg) rest += e(k);
    }
    const double sum = 1.0 + rest;
    r.loss += std::log1p(rest) - (logits(b, y) - top);
    r.grad.row(b) = e / sum;
    r.grad(b, y) -= 1.0;
  }
  r.loss /= static_cast<double>(batch);
  r.grad /= static_cast<double>(batch);
  return r;
}

}  // namespace kshape
