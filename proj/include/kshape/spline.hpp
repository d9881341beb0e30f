#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "kshape/errors.hpp"

namespace kshape {

/// Natural cubic spline through equally spaced samples y[0..m-1], with knots
/// at the integers 0..m-1.
class NaturalCubicSpline {
 public:
  explicit NaturalCubicSpline(std::vector<double> y) : y_(std::move(y)) {
    const int m = static_cast<int>(y_.size());
    if (m < 2) throw DomainError("NaturalCubicSpline: need at least 2 samples");
    second_.assign(m, 0.0);
    if (m == 2) return;

    // Interior second derivatives solve
    //   M[k-1] + 4 M[k] + M[k+1] = 6 (y[k-1] - 2 y[k] + y[k+1]),  M[0] = M[m-1] = 0
    // by the Thomas algorithm.
    const int inner = m - 2;
    std::vector<double> diag(inner, 4.0), rhs(inner);
    for (int k = 0; k < inner; ++k) rhs[k] = 6.0 * (y_[k] - 2.0 * y_[k + 1] + y_[k + 2]);
    for (int k = 1; k < inner; ++k) {
      const double w = 1.0 / diag[k - 1];
      diag[k] -= w;
      rhs[k] -= w * rhs[k - 1];
    }
    second_[inner] = rhs[inner - 1] / diag[inner - 1];
    for (int k = inner - 2; k >= 0; --k) second_[k + 1] = (rhs[k] - second_[k + 2]) / diag[k];
  }

  int knots() const { return static_cast<int>(y_.size()); }

  /// Value in segment `seg` at fractional offset u in [0, 1].
  double eval(int seg, double u) const {
    if (u == 0.0) return y_[seg];
    const double v = 1.0 - u;
    return v * y_[seg] + u * y_[seg + 1] +
           ((v * v * v - v) * second_[seg] + (u * u * u - u) * second_[seg + 1]) / 6.0;
  }

  /// Value at position t in [0, m-1].
  double operator()(double t) const {
    const int last = knots() - 1;
    if (t <= 0.0) return y_.front();
    if (t >= last) return y_.back();
    int seg = static_cast<int>(t);
    if (seg == last) seg = last - 1;
    return eval(seg, t - seg);
  }

 private:
  std::vector<double> y_;
  std::vector<double> second_;
};

/// Resamples every column of `channels` (rows = time) onto `frames`
/// uniformly spaced instants of normalized time [0, 1].
inline Eigen::MatrixXd resample_channels(const Eigen::MatrixXd& channels, int frames) {
  const int raw = static_cast<int>(channels.rows());
  if (raw < 2) throw DomainError("resample: sequence has fewer than 2 frames");
  if (frames < 2) throw DomainError("resample: target frame count must be at least 2");
  Eigen::MatrixXd out(frames, channels.cols());
  const long span = raw - 1, steps = frames - 1;
  for (Eigen::Index c = 0; c < channels.cols(); ++c) {
    std::vector<double> y(raw);
    for (int k = 0; k < raw; ++k) y[k] = channels(k, c);
    const NaturalCubicSpline spline(std::move(y));
    for (int i = 0; i < frames; ++i) {
      // Integer arithmetic keeps knot instants exact.
      const long pos = static_cast<long>(i) * span;
      int seg = static_cast<int>(pos / steps);
      long rem = pos % steps;
      if (seg == span) {
        seg = static_cast<int>(span) - 1;
        rem = steps;
      }
      out(i, c) = rem == steps ? channels(seg + 1, c)
                               : spline.eval(seg, static_cast<double>(rem) / steps);
    }
  }
  return out;
}

}  // namespace kshape
