#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kshape/errors.hpp"

namespace kshape {

/// One sequence per element, each a (time x features) matrix.
using Batch = std::vector<Eigen::MatrixXd>;

inline void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                          const char* where) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(where) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

inline void require_same_size(const Batch& a, const Batch& b, const char* where) {
  if (a.size() != b.size()) throw DimensionError(std::string(where) + ": batch sizes differ");
}

/// Deterministic random stream. Distributions are derived from raw 64-bit
/// draws so results do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  void fill_uniform(Eigen::MatrixXd& m, double bound) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(-bound, bound);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kshape
