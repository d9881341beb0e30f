#pragma once

// Riemannian primitives on Kendall's pre-shape sphere and on SO(3).
//
// Configurations are stored rows-as-points. A pre-shape of n landmarks is the
// (n-1) x 3 matrix of Helmert-centered coordinates scaled to unit Frobenius
// norm, kept as a flat row-major vector of length 3(n-1) so that entry
// (j, c) lives at index 3j + c. Tangent vectors use the same ambient layout.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "kshape/errors.hpp"

namespace kshape {

using Landmarks = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Angles below this use series limits instead of sin/cos ratios.
inline constexpr double kSmallAngle = 1e-7;
// exp_map rejects vectors whose inner product with the base exceeds this.
inline constexpr double kTangencyTol = 1e-8;
// Rotation3::from_matrix tolerance on orthogonality and determinant.
inline constexpr double kRotationTol = 1e-10;

/// (n-1) x n Helmert matrix with the constant first row dropped. Row k
/// (1-based in the classical construction) is
/// [1,...,1, -k, 0,...,0] / sqrt(k(k+1)) with k leading ones.
inline Eigen::MatrixXd helmert_submatrix(int n) {
  if (n < 2) {
    throw DimensionError("helmert_submatrix: need at least 2 landmarks, got " +
                         std::to_string(n));
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n - 1, n);
  for (int k = 1; k < n; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int j = 0; j < k; ++j) h(k - 1, j) = scale;
    h(k - 1, k) = -static_cast<double>(k) * scale;
  }
  return h;
}

/// A point on the pre-shape sphere: centered, unit norm.
class PreShape {
 public:
  using CoordsView = Eigen::Map<const Landmarks>;

  PreShape() = default;

  /// Wraps a flat vector that is already unit norm (within 1e-8). Vectors off
  /// by more than rounding are rescaled; others are stored verbatim so
  /// serialized pre-shapes round-trip bit for bit.
  static PreShape from_flat(const Eigen::VectorXd& flat) {
    if (flat.size() == 0 || flat.size() % 3 != 0) {
      throw DimensionError("PreShape: flat length must be a positive multiple of 3");
    }
    const double norm = flat.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw ZeroNormError("PreShape: zero or non-finite norm");
    }
    if (std::abs(norm - 1.0) > 1e-8) {
      throw DomainError("PreShape: vector is not unit norm (norm = " + std::to_string(norm) + ")");
    }
    PreShape p;
    p.flat_ = std::abs(norm - 1.0) > 1e-15 ? Eigen::VectorXd(flat / norm) : flat;
    return p;
  }

  const Eigen::VectorXd& flat() const { return flat_; }
  CoordsView coords() const { return CoordsView(flat_.data(), pseudo_joints(), 3); }
  int pseudo_joints() const { return static_cast<int>(flat_.size() / 3); }
  int dim() const { return static_cast<int>(flat_.size()); }

 private:
  Eigen::VectorXd flat_;
};

/// Ambient-coordinate vector tangent to the sphere at `base`.
struct TangentVector {
  PreShape base;
  Eigen::VectorXd vec;
};

/// Euler angles in radians about the x, y and z axes.
struct EulerAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// An element of SO(3).
class Rotation3 {
 public:
  Rotation3() : mat_(Eigen::Matrix3d::Identity()) {}

  static Rotation3 from_matrix(const Eigen::Matrix3d& m) {
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (!(ortho <= kRotationTol) || !(std::abs(det - 1.0) <= kRotationTol)) {
      throw DomainError("Rotation3: matrix is not in SO(3)");
    }
    Rotation3 r;
    r.mat_ = m;
    return r;
  }

  const Eigen::Matrix3d& matrix() const { return mat_; }
  Rotation3 inverse() const { return unchecked(mat_.transpose()); }

  // Used by constructors whose output is a rotation by construction.
  static Rotation3 unchecked(const Eigen::Matrix3d& m) {
    Rotation3 r;
    r.mat_ = m;
    return r;
  }

 private:
  Eigen::Matrix3d mat_;
};

/// Center with the Helmert submatrix and scale to unit norm.
inline PreShape to_preshape(const Landmarks& x) {
  if (x.rows() < 2) throw DimensionError("to_preshape: need at least 2 landmarks");
  if (!x.allFinite()) throw DomainError("to_preshape: non-finite coordinates");
  const Eigen::MatrixXd h = helmert_submatrix(static_cast<int>(x.rows()));
  Landmarks centered = h * x;
  const double norm = centered.norm();
  if (!(norm > 0.0)) throw ZeroNormError("to_preshape: configuration has zero centered norm");
  centered /= norm;
  return PreShape::from_flat(Eigen::Map<const Eigen::VectorXd>(centered.data(), centered.size()));
}

namespace detail {

inline void check_same_dim(const PreShape& a, const PreShape& b, const char* where) {
  if (a.dim() != b.dim()) throw DimensionError(std::string(where) + ": pre-shape dimensions differ");
}

inline double clamped_cos(const PreShape& a, const PreShape& b) {
  return std::clamp(a.flat().dot(b.flat()), -1.0, 1.0);
}

// Same value as acos(<a, b>) but accurate to rounding at both ends of
// [0, pi], where acos loses half the digits.
inline double arc_length(const PreShape& a, const PreShape& b) {
  return 2.0 * std::atan2((a.flat() - b.flat()).norm(), (a.flat() + b.flat()).norm());
}

}  // namespace detail

/// Arc length between two pre-shapes, in [0, pi].
inline double geodesic_distance(const PreShape& x, const PreShape& y) {
  detail::check_same_dim(x, y, "geodesic_distance");
  return detail::arc_length(x, y);
}

/// Inverse of exp_map: the initial velocity of the geodesic from x to y.
inline TangentVector log_map(const PreShape& x, const PreShape& y) {
  detail::check_same_dim(x, y, "log_map");
  const double c = detail::clamped_cos(x, y);
  const double theta = detail::arc_length(x, y);
  const double s = std::sin(theta);
  if (1.0 + c <= 1e-14) {
    throw UndefinedMapError("log_map: antipodal pre-shapes");
  }
  if (theta == 0.0) return {x, Eigen::VectorXd::Zero(x.dim())};
  Eigen::VectorXd w = y.flat() - c * x.flat();
  if (theta >= kSmallAngle) w *= theta / s;
  // Drop the rounding residue along the base direction.
  w -= w.dot(x.flat()) * x.flat();
  return {x, std::move(w)};
}

/// Follows the geodesic from x with initial velocity v for unit time.
inline PreShape exp_map(const PreShape& x, const Eigen::VectorXd& v) {
  if (v.size() != x.dim()) throw DimensionError("exp_map: tangent vector has wrong length");
  if (std::abs(v.dot(x.flat())) > kTangencyTol) {
    throw DomainError("exp_map: vector is not tangent at the base point");
  }
  const double norm = v.norm();
  Eigen::VectorXd y;
  if (norm < kSmallAngle) {
    const double n2 = norm * norm;
    y = (1.0 - 0.5 * n2) * x.flat() + (1.0 - n2 / 6.0) * v;
  } else {
    y = std::cos(norm) * x.flat() + (std::sin(norm) / norm) * v;
  }
  return PreShape::from_flat(y);
}

inline PreShape exp_map(const TangentVector& v) { return exp_map(v.base, v.vec); }

/// Normalization of the correction term in parallel_transport. Only
/// ThetaSquared is an isometry; ThetaLinear exists so the self-check can
/// demonstrate that the isometry test detects the wrong normalization.
enum class TransportNormalization { ThetaSquared, ThetaLinear };

/// Moves u from the tangent space at x to the tangent space at y along the
/// connecting geodesic.
inline TangentVector parallel_transport(
    const PreShape& x, const PreShape& y, const Eigen::VectorXd& u,
    TransportNormalization norm = TransportNormalization::ThetaSquared) {
  detail::check_same_dim(x, y, "parallel_transport");
  if (u.size() != x.dim()) throw DimensionError("parallel_transport: vector has wrong length");
  const double c = detail::clamped_cos(x, y);
  const double theta = detail::arc_length(x, y);
  if (1.0 + c <= 1e-14) {
    throw UndefinedMapError("parallel_transport: antipodal pre-shapes");
  }
  if (theta == 0.0) return {y, u};
  if (theta < kSmallAngle) {
    // Exact limit of the formula below, free of the 0/0.
    const double coef = y.flat().dot(u) / (1.0 + c);
    return {y, u - coef * (x.flat() + y.flat())};
  }
  const TangentVector forward = log_map(x, y);
  const TangentVector backward = log_map(y, x);
  const double denom = norm == TransportNormalization::ThetaSquared ? theta * theta : theta;
  const double coef = forward.vec.dot(u) / denom;
  return {y, u - coef * (backward.vec + forward.vec)};
}

inline TangentVector parallel_transport(const PreShape& y, const TangentVector& u) {
  return parallel_transport(u.base, y, u.vec);
}

/// Applies r to every pseudo-landmark row: coords * r^T.
inline PreShape rotate(const PreShape& p, const Rotation3& r) {
  Landmarks rotated = p.coords() * r.matrix().transpose();
  return PreShape::from_flat(Eigen::Map<const Eigen::VectorXd>(rotated.data(), rotated.size()));
}

struct ProcrustesResult {
  Rotation3 rotation;
  // True when the optimal rotation is not unique (rank-deficient cross-covariance).
  bool degenerate = false;
};

/// Rotation r minimizing ||x - y r^T||_F over SO(3), so rotate(y, r) is the
/// copy of y best aligned to x.
inline ProcrustesResult procrustes_rotation(const PreShape& x, const PreShape& y) {
  detail::check_same_dim(x, y, "procrustes_rotation");
  const Eigen::Matrix3d cross = x.coords().transpose() * y.coords();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  const bool reflected = (u * v.transpose()).determinant() < 0.0;
  if (reflected) d(2) = -1.0;
  const Eigen::Matrix3d r = u * d.asDiagonal() * v.transpose();

  const double scale = std::max(sv(0), 1e-300);
  const double tol = 1e-12;
  bool degenerate = sv(1) <= tol * scale;
  if (reflected && sv(2) > 0.0 && std::abs(sv(1) - sv(2)) <= tol * scale) degenerate = true;
  return {Rotation3::unchecked(r), degenerate};
}

inline Eigen::Matrix3d rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

inline Eigen::Matrix3d rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

inline Eigen::Matrix3d rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

/// R = Rz(gamma) * Ry(beta) * Rx(alpha).
inline Rotation3 rotation_from_euler(const EulerAngles& a) {
  return Rotation3::unchecked(rotation_z(a.gamma) * rotation_y(a.beta) * rotation_x(a.alpha));
}

/// Partial derivatives of rotation_from_euler with respect to alpha, beta, gamma.
inline std::array<Eigen::Matrix3d, 3> rotation_euler_jacobian(const EulerAngles& a) {
  auto d_rx = [](double t) {
    const double c = std::cos(t), s = std::sin(t);
    Eigen::Matrix3d m;
    m << 0, 0, 0, 0, -s, -c, 0, c, -s;
    return m;
  };
  auto d_ry = [](double t) {
    const double c = std::cos(t), s = std::sin(t);
    Eigen::Matrix3d m;
    m << -s, 0, c, 0, 0, 0, -c, 0, -s;
    return m;
  };
  auto d_rz = [](double t) {
    const double c = std::cos(t), s = std::sin(t);
    Eigen::Matrix3d m;
    m << -s, -c, 0, c, -s, 0, 0, 0, 0;
    return m;
  };
  const Eigen::Matrix3d rx = rotation_x(a.alpha), ry = rotation_y(a.beta), rz = rotation_z(a.gamma);
  return {rz * ry * d_rx(a.alpha), rz * d_ry(a.beta) * rx, d_rz(a.gamma) * ry * rx};
}

}  // namespace kshape
