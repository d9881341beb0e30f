#pragma once

// Synthetic skeleton actions: a canonical articulated figure animated by
// class-specific joint-angle curves, observed under a random per-sequence
// rotation / translation / scale plus Gaussian coordinate noise.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "kshape/errors.hpp"
#include "kshape/layers/common.hpp"
#include "kshape/pipeline.hpp"

namespace kshape {

/// Joint j swings about `axis` by amplitude * sin(2 pi (frequency * t + phase)),
/// t in [0, 1] over the sequence.
struct JointMotion {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
};

struct MotionTemplate {
  std::string name;
  std::vector<JointMotion> joints;
};

struct SyntheticSpec {
  int joints = 8;
  std::vector<MotionTemplate> classes;
  int sequences_per_class = 30;
  int test_per_class = 10;
  int frames = 40;
  double noise = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (joints < 3) throw DomainError("synth: need at least 3 joints");
    if (classes.size() < 2) throw DomainError("synth: need at least 2 classes");
    if (sequences_per_class < 1) throw DomainError("synth: sequences_per_class must be positive");
    if (test_per_class < 0 || test_per_class > sequences_per_class) {
      throw DomainError("synth: test_per_class must lie in [0, sequences_per_class]");
    }
    if (frames < 2) throw DomainError("synth: need at least 2 frames");
    if (!(noise >= 0.0)) throw DomainError("synth: noise must be non-negative");
    for (const auto& c : classes) {
      if (static_cast<int>(c.joints.size()) != joints) {
        throw DomainError("synth: template '" + c.name + "' has the wrong joint count");
      }
    }
  }
};

inline Eigen::Vector3d random_unit_vector(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-6);
  return v.normalized();
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Vector4d q;
  do {
    q = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  } while (q.norm() < 1e-6);
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

/// Random class templates for `class_count` classes of a `joints`-joint figure.
inline SyntheticSpec make_synthetic_spec(int class_count, int joints, int sequences_per_class,
                                         int test_per_class, int frames, double noise, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.joints = joints;
  spec.sequences_per_class = sequences_per_class;
  spec.test_per_class = test_per_class;
  spec.frames = frames;
  spec.noise = noise;
  spec.seed = seed;
  Rng rng(seed ^ 0x5bd1e995ULL);
  for (int c = 0; c < class_count; ++c) {
    MotionTemplate t;
    t.name = "action_" + std::to_string(c);
    for (int j = 0; j < joints; ++j) {
      JointMotion m;
      m.axis = random_unit_vector(rng);
      m.amplitude = rng.uniform(0.3, 1.0);
      m.frequency = rng.uniform(0.5, 1.5);
      m.phase = rng.uniform();
      t.joints.push_back(m);
    }
    spec.classes.push_back(std::move(t));
  }
  return spec;
}

namespace detail {

inline int figure_parent(int j) { return j == 0 ? -1 : (j - 1) / 2; }

// Rest-pose bone of joint j (unit length, spread by the golden angle).
inline Eigen::Vector3d figure_bone(int j) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (j + 0.5) / 16.0;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Eigen::Vector3d(r * std::cos(golden * j), r * std::sin(golden * j), z);
}

}  // namespace detail

/// Joint positions of the canonical figure posed by `motion` at time t in [0, 1].
inline Landmarks pose_figure(const MotionTemplate& motion, double t) {
  const int n = static_cast<int>(motion.joints.size());
  Landmarks pos(n, 3);
  std::vector<Eigen::Matrix3d> global(n);
  for (int j = 0; j < n; ++j) {
    const JointMotion& m = motion.joints[j];
    const double angle = m.amplitude * std::sin(2.0 * std::numbers::pi * (m.frequency * t + m.phase));
    const Eigen::Matrix3d local = Eigen::AngleAxisd(angle, m.axis).toRotationMatrix();
    const int p = detail::figure_parent(j);
    if (p < 0) {
      global[j] = local;
      pos.row(j).setZero();
    } else {
      global[j] = global[p] * local;
      pos.row(j) = pos.row(p) + (global[j] * detail::figure_bone(j)).transpose();
    }
  }
  return pos;
}

/// Deterministic dataset; the last `test_per_class` sequences of each class
/// form the test split.
inline Dataset synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  Dataset data;
  data.joints = spec.joints;
  Rng rng(spec.seed);
  for (const auto& c : spec.classes) data.class_names.push_back(c.name);
  for (int c = 0; c < static_cast<int>(spec.classes.size()); ++c) {
    for (int s = 0; s < spec.sequences_per_class; ++s) {
      const Eigen::Matrix3d rot = random_rotation(rng);
      const Eigen::RowVector3d shift(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      const double scale = rng.uniform(0.5, 2.0);
      char id[64];
      std::snprintf(id, sizeof id, "c%02d_s%03d", c, s);
      SkeletonSequence seq{id, c, {}};
      for (int f = 0; f < spec.frames; ++f) {
        Landmarks pose = pose_figure(spec.classes[c], static_cast<double>(f) / (spec.frames - 1));
        if (spec.noise > 0.0) {
          for (Eigen::Index i = 0; i < pose.size(); ++i) pose.data()[i] += spec.noise * rng.normal();
        }
        Landmarks observed = scale * (pose * rot.transpose());
        observed.rowwise() += shift;
        seq.frames.push_back(std::move(observed));
      }
      (s < spec.sequences_per_class - spec.test_per_class ? data.train : data.test).push_back(std::move(seq));
    }
  }
  return data;
}

}  // namespace kshape
