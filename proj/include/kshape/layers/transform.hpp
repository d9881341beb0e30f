#pragma once

// Learnable per-frame rotations applied in the tangent space.
//
// Each frame row of length 3J is viewed as a 3 x J matrix whose column j is
// pseudo-joint j. Rigid variants multiply the whole matrix by one kernel per
// frame; non-rigid variants use one kernel per (frame, joint). Matrix
// variants learn the 3 x 3 kernels directly, so they can drift off SO(3);
// angle variants learn Euler angles and rebuild rotations every forward pass.

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "kshape/geometry.hpp"
#include "kshape/layers/common.hpp"

namespace kshape {

enum class TransformVariant { RigidMatrix, RigidAngle, NonRigidMatrix, NonRigidAngle };

inline std::string_view to_string(TransformVariant v) {
  switch (v) {
    case TransformVariant::RigidMatrix: return "rigid_matrix";
    case TransformVariant::RigidAngle: return "rigid_angle";
    case TransformVariant::NonRigidMatrix: return "nonrigid_matrix";
    case TransformVariant::NonRigidAngle: return "nonrigid_angle";
  }
  return "?";
}

inline TransformVariant transform_variant_from_string(std::string_view s) {
  if (s == "rigid_matrix") return TransformVariant::RigidMatrix;
  if (s == "rigid_angle") return TransformVariant::RigidAngle;
  if (s == "nonrigid_matrix") return TransformVariant::NonRigidMatrix;
  if (s == "nonrigid_angle") return TransformVariant::NonRigidAngle;
  throw DomainError("unknown transform variant '" + std::string(s) + "'");
}

inline bool is_rigid(TransformVariant v) {
  return v == TransformVariant::RigidMatrix || v == TransformVariant::RigidAngle;
}

inline bool is_angle(TransformVariant v) {
  return v == TransformVariant::RigidAngle || v == TransformVariant::NonRigidAngle;
}

class TransformLayer {
 public:
  struct Gradients {
    Batch input;
    Eigen::MatrixXd params;
  };

  TransformLayer(TransformVariant variant, int frames, int joints)
      : variant_(variant), frames_(frames), joints_(joints) {
    if (frames < 1 || joints < 1) throw DimensionError("TransformLayer: frames and joints must be positive");
    const int kernels = is_rigid(variant) ? frames : frames * joints;
    if (is_angle(variant)) {
      params_ = Eigen::MatrixXd::Zero(kernels, 3);
    } else {
      params_.resize(3 * kernels, 3);
      for (int k = 0; k < kernels; ++k) params_.block<3, 3>(3 * k, 0).setIdentity();
    }
  }

  TransformVariant variant() const { return variant_; }
  int frames() const { return frames_; }
  int joints() const { return joints_; }
  int kernel_count() const { return is_rigid(variant_) ? frames_ : frames_ * joints_; }

  /// Matrix variants: 3K x 3 stacked kernels. Angle variants: K x 3 rows of
  /// (alpha, beta, gamma). Kernel index is frame (rigid) or frame * J + joint.
  const Eigen::MatrixXd& params() const { return params_; }
  Eigen::MatrixXd& params() { return params_; }

  Eigen::Matrix3d kernel(int frame, int joint) const { return kernel_at(index(frame, joint)); }

  Batch forward(const Batch& x) const {
    const auto kernels = materialize();
    Batch out;
    out.reserve(x.size());
    for (const auto& sample : x) {
      require_shape(sample, frames_, 3 * joints_, "TransformLayer::forward");
      Eigen::MatrixXd h(frames_, 3 * joints_);
      for (int i = 0; i < frames_; ++i) {
        for (int j = 0; j < joints_; ++j) {
          const Eigen::Vector3d q = sample.block<1, 3>(i, 3 * j).transpose();
          h.block<1, 3>(i, 3 * j) = (kernels[index(i, j)] * q).transpose();
        }
      }
      out.push_back(std::move(h));
    }
    return out;
  }

  Gradients backward(const Batch& x, const Batch& upstream) const {
    require_same_size(x, upstream, "TransformLayer::backward");
    const auto kernels = materialize();
    std::vector<Eigen::Matrix3d> kernel_grads(kernels.size(), Eigen::Matrix3d::Zero());
    Gradients g;
    g.input.reserve(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
      require_shape(x[b], frames_, 3 * joints_, "TransformLayer::backward");
      require_shape(upstream[b], frames_, 3 * joints_, "TransformLayer::backward");
      Eigen::MatrixXd dx(frames_, 3 * joints_);
      for (int i = 0; i < frames_; ++i) {
        for (int j = 0; j < joints_; ++j) {
          const int k = index(i, j);
          const Eigen::Vector3d q = x[b].block<1, 3>(i, 3 * j).transpose();
          const Eigen::Vector3d gq = upstream[b].block<1, 3>(i, 3 * j).transpose();
          kernel_grads[k] += gq * q.transpose();
          dx.block<1, 3>(i, 3 * j) = (kernels[k].transpose() * gq).transpose();
        }
      }
      g.input.push_back(std::move(dx));
    }

    g.params = Eigen::MatrixXd::Zero(params_.rows(), 3);
    for (int k = 0; k < kernel_count(); ++k) {
      if (is_angle(variant_)) {
        const auto partials = rotation_euler_jacobian(angles(k));
        for (int a = 0; a < 3; ++a) g.params(k, a) = kernel_grads[k].cwiseProduct(partials[a]).sum();
      } else {
        g.params.block<3, 3>(3 * k, 0) = kernel_grads[k];
      }
    }
    return g;
  }

 private:
  int index(int frame, int joint) const {
    return is_rigid(variant_) ? frame : frame * joints_ + joint;
  }

  EulerAngles angles(int k) const { return {params_(k, 0), params_(k, 1), params_(k, 2)}; }

  Eigen::Matrix3d kernel_at(int k) const {
    if (is_angle(variant_)) return rotation_from_euler(angles(k)).matrix();
    return params_.block<3, 3>(3 * k, 0);
  }

  std::vector<Eigen::Matrix3d> materialize() const {
    std::vector<Eigen::Matrix3d> kernels(kernel_count());
    for (int k = 0; k < kernel_count(); ++k) kernels[k] = kernel_at(k);
    return kernels;
  }

  TransformVariant variant_;
  int frames_;
  int joints_;
  Eigen::MatrixXd params_;
};

}  // namespace kshape
