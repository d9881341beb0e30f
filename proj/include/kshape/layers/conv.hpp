#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "kshape/layers/common.hpp"

namespace kshape {

/// Temporal cross-correlation with zero "same" padding followed by ReLU.
///
/// Weights are stored as out x (kernel * in); column `tap * in + c` holds the
/// weight applied to input channel c at offset `tap - kernel / 2`.
class Conv1DLayer {
 public:
  struct Gradients {
    Batch input;
    Eigen::MatrixXd weights;
    Eigen::MatrixXd bias;
  };

  Conv1DLayer(int in_channels, int out_channels, int kernel_size, int stride = 1)
      : in_(in_channels), out_(out_channels), kernel_(kernel_size), stride_(stride),
        weights_(Eigen::MatrixXd::Zero(out_channels, kernel_size * in_channels)),
        bias_(Eigen::MatrixXd::Zero(out_channels, 1)) {
    if (in_channels < 1 || out_channels < 1) throw DimensionError("Conv1DLayer: channel counts must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw DimensionError("Conv1DLayer: kernel size must be odd");
    if (stride < 1) throw DimensionError("Conv1DLayer: stride must be positive");
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel_size() const { return kernel_; }
  int stride() const { return stride_; }
  int output_length(int t) const { return (t - 1) / stride_ + 1; }

  Eigen::MatrixXd& weights() { return weights_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::MatrixXd& bias() { return bias_; }
  const Eigen::MatrixXd& bias() const { return bias_; }

  /// Convenience accessor for weight (o, c, tap).
  double& weight(int o, int c, int tap) { return weights_(o, tap * in_ + c); }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_));
    rng.fill_uniform(weights_, bound);
    rng.fill_uniform(bias_, bound);
  }

  Batch forward(const Batch& x) const {
    Batch out;
    out.reserve(x.size());
    for (const auto& sample : x) {
      Eigen::MatrixXd y = unfold(sample) * weights_.transpose();
      y.rowwise() += bias_.col(0).transpose();
      out.push_back(y.cwiseMax(0.0));
    }
    return out;
  }

  /// `output` is what forward returned for `x`; its zero pattern is the ReLU mask.
  Gradients backward(const Batch& x, const Batch& output, const Batch& upstream) const {
    require_same_size(x, upstream, "Conv1DLayer::backward");
    require_same_size(x, output, "Conv1DLayer::backward");
    Gradients g{{}, Eigen::MatrixXd::Zero(weights_.rows(), weights_.cols()),
                Eigen::MatrixXd::Zero(out_, 1)};
    g.input.reserve(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
      const int t = static_cast<int>(x[b].rows());
      const int t_out = output_length(t);
      require_shape(output[b], t_out, out_, "Conv1DLayer::backward");
      require_shape(upstream[b], t_out, out_, "Conv1DLayer::backward");
      const Eigen::MatrixXd pre_grad =
          (output[b].array() > 0.0).select(upstream[b], Eigen::MatrixXd::Zero(t_out, out_));
      const Eigen::MatrixXd cols = unfold(x[b]);
      g.weights.noalias() += pre_grad.transpose() * cols;
      g.bias.col(0) += pre_grad.colwise().sum().transpose();
      const Eigen::MatrixXd col_grad = pre_grad * weights_;
      g.input.push_back(fold(col_grad, t));
    }
    return g;
  }

 private:
  // t_out x (kernel * in) patch matrix.
  Eigen::MatrixXd unfold(const Eigen::MatrixXd& x) const {
    if (x.cols() != in_) throw DimensionError("Conv1DLayer: input channel count mismatch");
    const int t = static_cast<int>(x.rows());
    if (t < kernel_) throw DimensionError("Conv1DLayer: sequence shorter than the kernel");
    const int half = kernel_ / 2, t_out = output_length(t);
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(t_out, kernel_ * in_);
    for (int r = 0; r < t_out; ++r) {
      for (int tap = 0; tap < kernel_; ++tap) {
        const int src = r * stride_ + tap - half;
        if (src < 0 || src >= t) continue;
        cols.block(r, tap * in_, 1, in_) = x.row(src);
      }
    }
    return cols;
  }

  Eigen::MatrixXd fold(const Eigen::MatrixXd& cols, int t) const {
    const int half = kernel_ / 2;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(t, in_);
    for (int r = 0; r < cols.rows(); ++r) {
      for (int tap = 0; tap < kernel_; ++tap) {
        const int src = r * stride_ + tap - half;
        if (src < 0 || src >= t) continue;
        dx.row(src) += cols.block(r, tap * in_, 1, in_);
      }
    }
    return dx;
  }

  int in_, out_, kernel_, stride_;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd bias_;
};

/// Non-overlapping temporal max pooling. Ties go to the earliest index.
class MaxPool1D {
 public:
  explicit MaxPool1D(int window = 2) : window_(window) {
    if (window < 1) throw DimensionError("MaxPool1D: window must be positive");
  }

  int window() const { return window_; }
  int output_length(int t) const { return t / window_; }

  Batch forward(const Batch& x) const {
    Batch out;
    out.reserve(x.size());
    for (const auto& sample : x) {
      const int t = static_cast<int>(sample.rows());
      if (t < window_) throw DimensionError("MaxPool1D: sequence shorter than the window");
      Eigen::MatrixXd y(output_length(t), sample.cols());
      for (Eigen::Index c = 0; c < sample.cols(); ++c)
        for (int r = 0; r < y.rows(); ++r) y(r, c) = sample(argmax(sample, r, c), c);
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch backward(const Batch& x, const Batch& upstream) const {
    require_same_size(x, upstream, "MaxPool1D::backward");
    Batch g;
    g.reserve(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
      const int t_out = output_length(static_cast<int>(x[b].rows()));
      require_shape(upstream[b], t_out, x[b].cols(), "MaxPool1D::backward");
      Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x[b].rows(), x[b].cols());
      for (Eigen::Index c = 0; c < x[b].cols(); ++c)
        for (int r = 0; r < t_out; ++r) dx(argmax(x[b], r, c), c) += upstream[b](r, c);
      g.push_back(std::move(dx));
    }
    return g;
  }

 private:
  int argmax(const Eigen::MatrixXd& x, int r, Eigen::Index c) const {
    int best = r * window_;
    for (int k = 1; k < window_; ++k) {
      if (x(r * window_ + k, c) > x(best, c)) best = r * window_ + k;
    }
    return best;
  }

  int window_;
};

}  // namespace kshape
