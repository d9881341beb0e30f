#pragma once

// Skeleton sequences -> fixed-length pre-shape trajectories -> tangent-space
// feature arrays (T rows of length 3(n-1)).

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kshape/errors.hpp"
#include "kshape/geometry.hpp"
#include "kshape/spline.hpp"

namespace kshape {

struct SkeletonSequence {
  std::string id;
  int label = 0;
  std::vector<Landmarks> frames;

  int joints() const { return frames.empty() ? 0 : static_cast<int>(frames.front().rows()); }
  int length() const { return static_cast<int>(frames.size()); }
};

struct PreShapeTrajectory {
  std::vector<PreShape> shapes;
  bool aligned = false;
};

struct ReferenceShape {
  PreShape shape;
  std::string provenance;
};

/// How a pre-shape trajectory becomes network input. `None` feeds the
/// flattened pre-shape coordinates directly (the ablation baseline).
enum class Projection { None, CommonReference, FirstFrame, ShootingPT };

inline std::string_view to_string(Projection p) {
  switch (p) {
    case Projection::None: return "none";
    case Projection::CommonReference: return "common";
    case Projection::FirstFrame: return "first_frame";
    case Projection::ShootingPT: return "shooting_pt";
  }
  return "?";
}

inline Projection projection_from_string(std::string_view s) {
  if (s == "none") return Projection::None;
  if (s == "common") return Projection::CommonReference;
  if (s == "first_frame") return Projection::FirstFrame;
  if (s == "shooting_pt") return Projection::ShootingPT;
  throw DomainError("unknown projection '" + std::string(s) + "'");
}

struct TangentTrajectory {
  Eigen::MatrixXd data;  // T x 3(n-1)
  Projection projection = Projection::CommonReference;
  std::optional<ReferenceShape> reference;
};

inline void validate(const SkeletonSequence& seq) {
  if (seq.length() < 2) throw DomainError("sequence '" + seq.id + "': fewer than 2 frames");
  const int n = seq.joints();
  for (int i = 0; i < seq.length(); ++i) {
    if (seq.frames[i].rows() != n) {
      throw DimensionError("sequence '" + seq.id + "': frame " + std::to_string(i) +
                           " has a different joint count");
    }
    if (!seq.frames[i].allFinite()) {
      throw DomainError("sequence '" + seq.id + "': non-finite coordinate in frame " +
                        std::to_string(i));
    }
  }
}

/// Natural cubic spline resampling of every coordinate channel to `frames`
/// uniform instants. The first and last frames are reproduced exactly.
inline SkeletonSequence resample_sequence(const SkeletonSequence& seq, int frames) {
  validate(seq);
  const int n = seq.joints();
  Eigen::MatrixXd channels(seq.length(), 3 * n);
  for (int k = 0; k < seq.length(); ++k) {
    channels.row(k) = Eigen::Map<const Eigen::RowVectorXd>(seq.frames[k].data(), 3 * n);
  }
  const Eigen::MatrixXd resampled = resample_channels(channels, frames);
  SkeletonSequence out{seq.id, seq.label, {}};
  out.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    Landmarks frame(n, 3);
    Eigen::Map<Eigen::RowVectorXd>(frame.data(), 3 * n) = resampled.row(i);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

/// Maps every frame to the pre-shape sphere; with `align`, each pre-shape is
/// Procrustes-rotated onto the reference.
inline PreShapeTrajectory sequence_to_trajectory(const SkeletonSequence& seq,
                                                 const ReferenceShape& ref, bool align) {
  PreShapeTrajectory traj;
  traj.aligned = align;
  traj.shapes.reserve(seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    PreShape p;
    try {
      p = to_preshape(seq.frames[i]);
    } catch (const ZeroNormError&) {
      throw ZeroNormError("sequence '" + seq.id + "': degenerate frame " + std::to_string(i));
    }
    if (align) {
      if (p.dim() != ref.shape.dim()) {
        throw DimensionError("sequence '" + seq.id + "': joint count differs from the reference");
      }
      p = rotate(p, procrustes_rotation(ref.shape, p).rotation);
    }
    traj.shapes.push_back(std::move(p));
  }
  return traj;
}

namespace detail {

inline void require_frames(const PreShapeTrajectory& traj) {
  if (traj.shapes.empty()) throw DomainError("projection: empty trajectory");
}

template <class F>
auto at_frame(std::size_t i, F&& f) {
  try {
    return f();
  } catch (const UndefinedMapError& e) {
    throw UndefinedMapError(std::string(e.what()) + " at frame " + std::to_string(i));
  }
}

}  // namespace detail

/// Row i = log_ref(traj[i]).
inline TangentTrajectory project_common(const PreShapeTrajectory& traj, const ReferenceShape& ref) {
  detail::require_frames(traj);
  const auto frames = traj.shapes.size();
  TangentTrajectory out{Eigen::MatrixXd(frames, ref.shape.dim()), Projection::CommonReference, ref};
  for (std::size_t i = 0; i < frames; ++i) {
    out.data.row(i) = detail::at_frame(i, [&] { return log_map(ref.shape, traj.shapes[i]).vec; });
  }
  return out;
}

/// Row i = log_{traj[0]}(traj[i]); row 0 is zero.
inline TangentTrajectory project_first_frame(const PreShapeTrajectory& traj) {
  detail::require_frames(traj);
  const auto frames = traj.shapes.size();
  const PreShape& base = traj.shapes.front();
  TangentTrajectory out{Eigen::MatrixXd(frames, base.dim()), Projection::FirstFrame, std::nullopt};
  for (std::size_t i = 0; i < frames; ++i) {
    out.data.row(i) = detail::at_frame(i, [&] { return log_map(base, traj.shapes[i]).vec; });
  }
  return out;
}

/// Row 0 = log_ref(traj[0]); row i > 0 is the shooting vector
/// log_{traj[i-1]}(traj[i]) transported in one step to the reference.
inline TangentTrajectory project_shooting_pt(const PreShapeTrajectory& traj,
                                             const ReferenceShape& ref) {
  detail::require_frames(traj);
  const auto frames = traj.shapes.size();
  TangentTrajectory out{Eigen::MatrixXd(frames, ref.shape.dim()), Projection::ShootingPT, ref};
  out.data.row(0) = detail::at_frame(0, [&] { return log_map(ref.shape, traj.shapes[0]).vec; });
  for (std::size_t i = 1; i < frames; ++i) {
    out.data.row(i) = detail::at_frame(i, [&] {
      const TangentVector shoot = log_map(traj.shapes[i - 1], traj.shapes[i]);
      return parallel_transport(traj.shapes[i - 1], ref.shape, shoot.vec).vec;
    });
  }
  return out;
}

/// Flattened pre-shape coordinates, one frame per row.
inline TangentTrajectory project_none(const PreShapeTrajectory& traj) {
  detail::require_frames(traj);
  const auto frames = traj.shapes.size();
  TangentTrajectory out{Eigen::MatrixXd(frames, traj.shapes.front().dim()), Projection::None,
                        std::nullopt};
  for (std::size_t i = 0; i < frames; ++i) out.data.row(i) = traj.shapes[i].flat();
  return out;
}

inline TangentTrajectory project(const PreShapeTrajectory& traj, Projection p,
                                 const ReferenceShape& ref) {
  switch (p) {
    case Projection::None: return project_none(traj);
    case Projection::CommonReference: return project_common(traj, ref);
    case Projection::FirstFrame: return project_first_frame(traj);
    case Projection::ShootingPT: return project_shooting_pt(traj, ref);
  }
  throw DomainError("project: unknown projection");
}

/// Length-3J row -> 3 x J matrix; column j is pseudo-joint j's (x, y, z).
inline Eigen::Matrix<double, 3, Eigen::Dynamic> row_to_matrix(const Eigen::VectorXd& row) {
  if (row.size() == 0 || row.size() % 3 != 0) {
    throw DimensionError("row_to_matrix: length must be a positive multiple of 3");
  }
  return Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>>(row.data(), 3, row.size() / 3);
}

inline Eigen::VectorXd matrix_to_row(const Eigen::Matrix<double, 3, Eigen::Dynamic>& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

/// Pre-shape of frame 0 of `seq`, the default reference.
inline ReferenceShape reference_from_first_frame(const SkeletonSequence& seq) {
  validate(seq);
  return {to_preshape(seq.frames.front()), "frame 0 of sequence '" + seq.id + "'"};
}

}  // namespace kshape
