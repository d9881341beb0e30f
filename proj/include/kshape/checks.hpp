#pragma once

// Self-check suites: geometry invariants, layer and end-to-end gradient
// checks, pipeline invariances and the SO(3) constraint of the angle
// variants. Each check reports its measured worst-case error next to the
// tolerance it must meet.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "kshape/geometry.hpp"
#include "kshape/gradcheck.hpp"
#include "kshape/layers/common.hpp"
#include "kshape/model.hpp"
#include "kshape/pipeline.hpp"
#include "kshape/synth.hpp"
#include "kshape/trajectory.hpp"

namespace kshape::checks {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;

  bool passed() const { return std::isfinite(measured) && measured <= tolerance; }
};

struct Report {
  std::vector<CheckResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed(); });
  }

  void add(std::string name, double measured, double tolerance) {
    results.push_back({std::move(name), measured, tolerance});
  }

  void append(const Report& other) { results.insert(results.end(), other.results.begin(), other.results.end()); }

  std::string format() const {
    std::string out;
    char line[256];
    for (const auto& r : results) {
      std::snprintf(line, sizeof line, "%s  %-44s max_err=%.3e  tol=%.1e\n", r.passed() ? "PASS" : "FAIL",
                    r.name.c_str(), r.measured, r.tolerance);
      out += line;
    }
    return out;
  }
};

// ---------------------------------------------------------------- generators

inline Landmarks random_landmarks(Rng& rng, int n) {
  Landmarks x(n, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

inline PreShape random_preshape(Rng& rng, int n) { return to_preshape(random_landmarks(rng, n)); }

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

/// Tangent vector at `base` with the given norm.
inline Eigen::VectorXd random_tangent(Rng& rng, const PreShape& base, double norm) {
  Eigen::VectorXd v = random_vector(rng, base.dim());
  v -= v.dot(base.flat()) * base.flat();
  return v.normalized() * norm;
}

inline EulerAngles random_angles(Rng& rng) {
  const double pi = std::numbers::pi;
  return {rng.uniform(-pi, pi), rng.uniform(-pi, pi), rng.uniform(-pi, pi)};
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Batch random_batch(Rng& rng, int batch, int rows, int cols, double scale = 1.0) {
  Batch b;
  for (int i = 0; i < batch; ++i) b.push_back(random_matrix(rng, rows, cols, scale));
  return b;
}

/// A pre-shape near `base`: pairs drawn this way exercise the small-angle branches.
inline PreShape nearby_preshape(Rng& rng, const PreShape& base, double angle) {
  return exp_map(base, random_tangent(rng, base, angle));
}

// ---------------------------------------------------------------- geometry

struct GeometryOptions {
  int joints = 25;
  int pairs = 1000;
  int procrustes_trials = 500;
  int euler_trials = 10000;
  int jacobian_trials = 1000;
  std::uint64_t seed = 20201;
  TransportNormalization transport = TransportNormalization::ThetaSquared;
};

inline Report geometry_suite(const GeometryOptions& opt = {}) {
  Report rep;
  Rng rng(opt.seed);

  double helmert_orth = 0.0, helmert_const = 0.0;
  for (int n = 2; n <= 40; ++n) {
    const Eigen::MatrixXd h = helmert_submatrix(n);
    helmert_orth = std::max(helmert_orth, (h * h.transpose() - Eigen::MatrixXd::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff());
    helmert_const = std::max(helmert_const, (h * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff());
  }
  rep.add("geometry.helmert_orthonormal", helmert_orth, 1e-12);
  rep.add("geometry.helmert_rows_sum_zero", helmert_const, 1e-12);

  double translation = 0.0, scaling = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Landmarks x = random_landmarks(rng, opt.joints);
    const PreShape p = to_preshape(x);
    Landmarks shifted = x;
    shifted.rowwise() += Eigen::RowVector3d(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    translation = std::max(translation, (to_preshape(shifted).flat() - p.flat()).cwiseAbs().maxCoeff());
    const Landmarks scaled = rng.uniform(0.01, 100.0) * x;
    scaling = std::max(scaling, (to_preshape(scaled).flat() - p.flat()).cwiseAbs().maxCoeff());
  }
  rep.add("geometry.preshape_translation_invariance", translation, 1e-12);
  rep.add("geometry.preshape_scale_invariance", scaling, 1e-12);

  double roundtrip = 0.0, tangency = 0.0, log_norm = 0.0, inverse = 0.0;
  double isometry = 0.0, target_tangency = 0.0;
  for (int k = 0; k < opt.pairs; ++k) {
    const PreShape x = random_preshape(rng, opt.joints);
    // Mostly generic pairs, plus close pairs for the small-angle branches.
    const PreShape y = k % 10 == 9 ? nearby_preshape(rng, x, k % 20 == 19 ? 1e-9 : 1e-4) : random_preshape(rng, opt.joints);
    const TangentVector v = log_map(x, y);
    roundtrip = std::max(roundtrip, (exp_map(v).flat() - y.flat()).cwiseAbs().maxCoeff());
    tangency = std::max(tangency, std::abs(v.vec.dot(x.flat())));
    log_norm = std::max(log_norm, std::abs(v.vec.norm() - geodesic_distance(x, y)));

    const Eigen::VectorXd w = random_tangent(rng, x, rng.uniform(0.0, 3.0));
    inverse = std::max(inverse, (log_map(x, exp_map(x, w)).vec - w).cwiseAbs().maxCoeff());

    const Eigen::VectorXd u = random_tangent(rng, x, rng.uniform(0.1, 2.0));
    const Eigen::VectorXd z = random_tangent(rng, x, rng.uniform(0.1, 2.0));
    const Eigen::VectorXd pu = parallel_transport(x, y, u, opt.transport).vec;
    const Eigen::VectorXd pz = parallel_transport(x, y, z, opt.transport).vec;
    isometry = std::max(isometry, std::abs(pu.dot(pz) - u.dot(z)));
    isometry = std::max(isometry, std::abs(pu.norm() - u.norm()));
    target_tangency = std::max(target_tangency, std::abs(pu.dot(y.flat())));
  }
  rep.add("geometry.exp_log_roundtrip", roundtrip, 1e-10);
  rep.add("geometry.log_exp_roundtrip", inverse, 1e-10);
  rep.add("geometry.log_tangency", tangency, 1e-10);
  rep.add("geometry.log_norm_equals_distance", log_norm, 1e-10);
  rep.add("geometry.transport_isometry", isometry, 1e-9);
  rep.add("geometry.transport_target_tangency", target_tangency, 1e-9);

  double recovery = 0.0, aligned = 0.0, increase = 0.0;
  for (int k = 0; k < opt.procrustes_trials; ++k) {
    const PreShape x = random_preshape(rng, opt.joints);
    const Rotation3 planted = Rotation3::unchecked(random_rotation(rng));
    // y = x * planted; rotating y by planted brings it back onto x.
    const PreShape y = rotate(x, planted.inverse());
    const ProcrustesResult found = procrustes_rotation(x, y);
    recovery = std::max(recovery, (found.rotation.matrix() - planted.matrix()).cwiseAbs().maxCoeff());
    aligned = std::max(aligned, geodesic_distance(x, rotate(y, found.rotation)));

    const PreShape other = random_preshape(rng, opt.joints);
    const double before = geodesic_distance(x, other);
    const double after = geodesic_distance(x, rotate(other, procrustes_rotation(x, other).rotation));
    increase = std::max(increase, after - before);
  }
  rep.add("geometry.procrustes_recovers_rotation", recovery, 1e-8);
  rep.add("geometry.procrustes_aligned_distance", aligned, 1e-9);
  rep.add("geometry.procrustes_never_increases_distance", std::max(increase, 0.0), 1e-12);

  double euler_orth = 0.0, euler_det = 0.0;
  for (int k = 0; k < opt.euler_trials; ++k) {
    const Eigen::Matrix3d r = rotation_from_euler(random_angles(rng)).matrix();
    euler_orth = std::max(euler_orth, (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    euler_det = std::max(euler_det, std::abs(r.determinant() - 1.0));
  }
  rep.add("geometry.euler_orthogonal", euler_orth, 1e-12);
  rep.add("geometry.euler_unit_determinant", euler_det, 1e-12);

  double jac = 0.0;
  const double h = 1e-6;
  for (int k = 0; k < opt.jacobian_trials; ++k) {
    const EulerAngles a = random_angles(rng);
    const auto analytic = rotation_euler_jacobian(a);
    for (int axis = 0; axis < 3; ++axis) {
      EulerAngles up = a, down = a;
      double* fu = axis == 0 ? &up.alpha : axis == 1 ? &up.beta : &up.gamma;
      double* fd = axis == 0 ? &down.alpha : axis == 1 ? &down.beta : &down.gamma;
      *fu += h;
      *fd -= h;
      const Eigen::Matrix3d numeric =
          (rotation_from_euler(up).matrix() - rotation_from_euler(down).matrix()) / (2.0 * h);
      jac = std::max(jac, gradient_error(analytic[axis], numeric));
    }
  }
  rep.add("geometry.euler_jacobian_vs_finite_diff", jac, 1e-6);
  return rep;
}

// ---------------------------------------------------------------- gradients

namespace detail {

// Scalar probe loss sum(out .* probe).
inline double probe(const Batch& out, const Batch& weights) {
  double s = 0.0;
  for (std::size_t b = 0; b < out.size(); ++b) s += out[b].cwiseProduct(weights[b]).sum();
  return s;
}

template <class Loss>
double batch_input_error(Batch& x, const Batch& analytic, Loss&& loss) {
  double err = 0.0;
  for (std::size_t b = 0; b < x.size(); ++b) err = std::max(err, gradient_error(analytic[b], numeric_gradient(x[b], loss)));
  return err;
}

}  // namespace detail

inline double transform_gradient_error(TransformVariant variant, Rng& rng) {
  TransformLayer layer(variant, 3, 4);
  if (is_angle(variant)) {
    for (Eigen::Index i = 0; i < layer.params().size(); ++i) layer.params().data()[i] = rng.uniform(-3.0, 3.0);
  } else {
    layer.params() += random_matrix(rng, layer.params().rows(), 3, 0.3);
  }
  Batch x = random_batch(rng, 2, 3, 12);
  const Batch probe = random_batch(rng, 2, 3, 12);
  const auto g = layer.backward(x, probe);
  auto loss = [&] { return detail::probe(layer.forward(x), probe); };
  double err = gradient_error(g.params, numeric_gradient(layer.params(), loss));
  err = std::max(err, detail::batch_input_error(x, g.input, loss));
  return err;
}

inline double conv_gradient_error(Rng& rng, int kernel) {
  Conv1DLayer conv(3, 4, kernel);
  conv.weights() = random_matrix(rng, 4, 3 * kernel);
  conv.bias() = random_matrix(rng, 4, 1, 0.5);
  Batch x = random_batch(rng, 2, 7, 3);
  const Batch probe = random_batch(rng, 2, 7, 4);
  const Batch out = conv.forward(x);
  const auto g = conv.backward(x, out, probe);
  auto loss = [&] { return detail::probe(conv.forward(x), probe); };
  double err = gradient_error(g.weights, numeric_gradient(conv.weights(), loss));
  err = std::max(err, gradient_error(g.bias, numeric_gradient(conv.bias(), loss)));
  return std::max(err, detail::batch_input_error(x, g.input, loss));
}

inline double pool_gradient_error(Rng& rng) {
  MaxPool1D pool(2);
  Batch x = random_batch(rng, 2, 7, 3);
  const Batch probe = random_batch(rng, 2, 3, 3);
  const Batch g = pool.backward(x, probe);
  return detail::batch_input_error(x, g, [&] { return detail::probe(pool.forward(x), probe); });
}

inline double lstm_gradient_error(Rng& rng, int steps, int features, int hidden) {
  LSTMLayer lstm(features, hidden);
  lstm.w() = random_matrix(rng, 4 * hidden, features, 0.7);
  lstm.u() = random_matrix(rng, 4 * hidden, hidden, 0.7);
  lstm.bias() = random_matrix(rng, 4 * hidden, 1, 0.5);
  Batch x = random_batch(rng, 2, steps, features);
  const Eigen::MatrixXd probe = random_matrix(rng, 2, hidden);
  const auto g = lstm.backward(lstm.forward_trace(x), probe);
  auto loss = [&] { return lstm.forward(x).cwiseProduct(probe).sum(); };
  double err = gradient_error(g.w, numeric_gradient(lstm.w(), loss));
  err = std::max(err, gradient_error(g.u, numeric_gradient(lstm.u(), loss)));
  err = std::max(err, gradient_error(g.bias, numeric_gradient(lstm.bias(), loss)));
  return std::max(err, detail::batch_input_error(x, g.input, loss));
}

inline double dense_gradient_error(Rng& rng) {
  DenseLayer dense(4, 3);
  dense.weights() = random_matrix(rng, 3, 4);
  dense.bias() = random_matrix(rng, 3, 1);
  Eigen::MatrixXd x = random_matrix(rng, 3, 4);
  const Eigen::MatrixXd probe = random_matrix(rng, 3, 3);
  const auto g = dense.backward(x, probe);
  auto loss = [&] { return dense.forward(x).cwiseProduct(probe).sum(); };
  double err = gradient_error(g.weights, numeric_gradient(dense.weights(), loss));
  err = std::max(err, gradient_error(g.bias, numeric_gradient(dense.bias(), loss)));
  return std::max(err, gradient_error(g.input, numeric_gradient(x, loss)));
}

inline double loss_gradient_error(Rng& rng) {
  Eigen::MatrixXd logits = random_matrix(rng, 4, 5, 2.0);
  const std::vector<int> labels = {0, 3, 4, 1};
  const auto r = softmax_cross_entropy(logits, labels);
  return gradient_error(r.grad, numeric_gradient(logits, [&] { return softmax_cross_entropy(logits, labels).loss; }));
}

/// Tiny model (T=8, n=5, K=2) with randomized parameters everywhere,
/// including the transform layer.
inline Model tiny_model(std::optional<TransformVariant> variant, Rng& rng, std::uint64_t seed = 7) {
  KShapeNetConfig c;
  c.frames = 8;
  c.joints = 5;
  c.classes = 2;
  c.transform = variant;
  c.conv1_channels = 4;
  c.conv1_kernel = 3;
  c.conv2_channels = 4;
  c.conv2_kernel = 3;
  c.lstm_hidden = 5;
  c.seed = seed;
  Model m = build_model(c, {random_preshape(rng, c.joints), "random"});
  if (m.transform()) {
    auto& p = m.transform()->params();
    if (is_angle(*variant)) {
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-3.0, 3.0);
    } else {
      p += random_matrix(rng, p.rows(), p.cols(), 0.3);
    }
  }
  return m;
}

inline double end_to_end_gradient_error(std::optional<TransformVariant> variant, Rng& rng) {
  Model m = tiny_model(variant, rng);
  const Batch x = random_batch(rng, 3, 8, 12, 0.3);
  const std::vector<int> labels = {0, 1, 1};
  const auto analytic = m.loss_and_gradients(x, labels);
  auto params = m.parameters();
  double err = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Eigen::MatrixXd numeric =
        numeric_gradient(*params[k], [&] { return softmax_cross_entropy(m.forward(x), labels).loss; });
    err = std::max(err, gradient_error(analytic.grads[k], numeric));
  }
  return err;
}

inline Report gradient_suite(std::uint64_t seed = 4242) {
  Report rep;
  Rng rng(seed);
  for (auto v : {TransformVariant::RigidMatrix, TransformVariant::RigidAngle, TransformVariant::NonRigidMatrix,
                 TransformVariant::NonRigidAngle}) {
    rep.add("gradients.transform_" + std::string(to_string(v)), transform_gradient_error(v, rng), 1e-5);
  }
  rep.add("gradients.conv1d_k3", conv_gradient_error(rng, 3), 1e-5);
  rep.add("gradients.conv1d_k5", conv_gradient_error(rng, 5), 1e-5);
  rep.add("gradients.maxpool", pool_gradient_error(rng), 1e-5);
  rep.add("gradients.lstm_T3_F2_H2", lstm_gradient_error(rng, 3, 2, 2), 1e-5);
  rep.add("gradients.lstm_T6_F3_H4", lstm_gradient_error(rng, 6, 3, 4), 1e-5);
  rep.add("gradients.dense", dense_gradient_error(rng), 1e-5);
  rep.add("gradients.softmax_cross_entropy", loss_gradient_error(rng), 1e-5);
  rep.add("gradients.end_to_end_no_transform", end_to_end_gradient_error(std::nullopt, rng), 1e-4);
  for (auto v : {TransformVariant::RigidMatrix, TransformVariant::RigidAngle, TransformVariant::NonRigidMatrix,
                 TransformVariant::NonRigidAngle}) {
    rep.add("gradients.end_to_end_" + std::string(to_string(v)), end_to_end_gradient_error(v, rng), 1e-4);
  }
  return rep;
}

// ---------------------------------------------------------------- SO(3)

/// Worst orthogonality and determinant error of the materialized kernels
/// after `steps` Adam updates on random data.
inline std::pair<double, double> angle_kernel_drift(TransformVariant variant, int steps, Rng& rng) {
  Model m = tiny_model(variant, rng);
  m.optimizer().learning_rate = 1e-2;
  const Batch x = random_batch(rng, 4, 8, 12, 0.3);
  const std::vector<int> labels = {0, 1, 0, 1};
  for (int s = 0; s < steps; ++s) m.train_step(x, labels);
  double orth = 0.0, det = 0.0;
  const auto& layer = *m.transform();
  const int joints = is_rigid(variant) ? 1 : layer.joints();
  for (int i = 0; i < layer.frames(); ++i) {
    for (int j = 0; j < joints; ++j) {
      const Eigen::Matrix3d o = layer.kernel(i, j);
      orth = std::max(orth, (o.transpose() * o - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
      det = std::max(det, std::abs(o.determinant() - 1.0));
    }
  }
  return {orth, det};
}

inline Report so3_suite(std::uint64_t seed = 99) {
  Report rep;
  Rng rng(seed);
  for (auto v : {TransformVariant::RigidAngle, TransformVariant::NonRigidAngle}) {
    const auto [orth, det] = angle_kernel_drift(v, 100, rng);
    rep.add("so3." + std::string(to_string(v)) + "_orthogonal_after_100_steps", orth, 1e-10);
    rep.add("so3." + std::string(to_string(v)) + "_det_after_100_steps", det, 1e-10);
  }
  return rep;
}

// ---------------------------------------------------------------- pipeline

/// Applies x -> scale * x R^T + shift to every frame.
inline SkeletonSequence transform_sequence(const SkeletonSequence& seq, const Eigen::Matrix3d& rot,
                                           const Eigen::RowVector3d& shift, double scale) {
  SkeletonSequence out = seq;
  for (auto& f : out.frames) {
    Landmarks moved = scale * (f * rot.transpose());
    moved.rowwise() += shift;
    f = std::move(moved);
  }
  return out;
}

inline Report pipeline_suite(std::uint64_t seed = 7777) {
  Report rep;
  Rng rng(seed);
  const SyntheticSpec spec = make_synthetic_spec(3, 8, 2, 0, 30, 0.02, seed);
  const Dataset data = synth_generate(spec);
  const ReferenceShape ref = default_reference(data);
  const SkeletonSequence& seq = data.train[1];
  const SkeletonSequence moved =
      transform_sequence(seq, random_rotation(rng), Eigen::RowVector3d(3.0, -2.0, 0.5), 2.7);
  const SkeletonSequence shifted =
      transform_sequence(seq, Eigen::Matrix3d::Identity(), Eigen::RowVector3d(-4.0, 1.0, 9.0), 0.3);

  double similarity = 0.0, rotation = 0.0;
  for (auto p : {Projection::None, Projection::CommonReference, Projection::FirstFrame, Projection::ShootingPT}) {
    const PreprocessOptions plain{16, p, false}, aligned{16, p, true};
    similarity = std::max(similarity, (encode_sequence(seq, plain, ref).data -
                                       encode_sequence(shifted, plain, ref).data).cwiseAbs().maxCoeff());
    rotation = std::max(rotation, (encode_sequence(seq, aligned, ref).data -
                                   encode_sequence(moved, aligned, ref).data).cwiseAbs().maxCoeff());
  }
  rep.add("pipeline.translation_scale_invariance", similarity, 1e-9);
  rep.add("pipeline.aligned_rotation_invariance", rotation, 1e-8);

  const PreShapeTrajectory traj = sequence_to_trajectory(resample_sequence(seq, 16), ref, true);
  const TangentTrajectory common = project_common(traj, ref);
  double lossless = 0.0;
  for (std::size_t i = 0; i < traj.shapes.size(); ++i) {
    const Eigen::VectorXd row = common.data.row(static_cast<Eigen::Index>(i)).transpose();
    lossless = std::max(lossless, (exp_map(ref.shape, row).flat() - traj.shapes[i].flat()).cwiseAbs().maxCoeff());
  }
  rep.add("pipeline.common_reference_lossless", lossless, 1e-9);

  const PreShapeTrajectory constant{std::vector<PreShape>(6, ref.shape), true};
  double zeros = project_common(constant, ref).data.cwiseAbs().maxCoeff();
  zeros = std::max(zeros, project_first_frame(constant).data.cwiseAbs().maxCoeff());
  zeros = std::max(zeros, project_shooting_pt(constant, ref).data.cwiseAbs().maxCoeff());
  rep.add("pipeline.constant_trajectory_projects_to_zero", zeros, 1e-12);

  // Full model logits under a global rotation + translation + scale.
  KShapeNetConfig c;
  c.frames = 16;
  c.joints = 8;
  c.classes = 3;
  c.conv1_channels = 8;
  c.conv2_channels = 8;
  c.lstm_hidden = 8;
  c.seed = seed;
  Model m = build_model(c, ref);
  for (Eigen::Index i = 0; i < m.transform()->params().size(); ++i) {
    m.transform()->params().data()[i] = rng.uniform(-1.0, 1.0);
  }
  const PreprocessOptions opt = preprocess_options(c);
  const Eigen::MatrixXd a = m.forward({encode_sequence(seq, opt, ref).data});
  const Eigen::MatrixXd b = m.forward({encode_sequence(moved, opt, ref).data});
  rep.add("pipeline.model_logits_rigid_similarity_invariance", (a - b).cwiseAbs().maxCoeff(), 1e-6);
  return rep;
}

inline Report all_suites() {
  Report rep = geometry_suite();
  rep.append(gradient_suite());
  rep.append(so3_suite());
  rep.append(pipeline_suite());
  return rep;
}

}  // namespace kshape::checks
