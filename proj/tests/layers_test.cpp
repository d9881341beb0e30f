#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kshape/checks.hpp"
#include "kshape/layers/adam.hpp"
#include "kshape/layers/conv.hpp"
#include "kshape/layers/dense.hpp"
#include "kshape/layers/lstm.hpp"
#include "kshape/layers/transform.hpp"

using namespace kshape;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double max_abs(const Batch& a, const Batch& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, max_abs(a[i] - b[i]));
  return e;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Transform, IdentityInitPassesInputThrough) {
  Rng rng(1);
  const Batch x = checks::random_batch(rng, 3, 6, 12);
  for (auto v : {TransformVariant::RigidMatrix, TransformVariant::RigidAngle, TransformVariant::NonRigidMatrix,
                 TransformVariant::NonRigidAngle}) {
    const TransformLayer layer(v, 6, 4);
    EXPECT_EQ(max_abs(layer.forward(x), x), 0.0) << to_string(v);
  }
}

TEST(Transform, RigidAngleQuarterTurnAboutX) {
  Rng rng(2);
  TransformLayer layer(TransformVariant::RigidAngle, 3, 2);
  layer.params().col(0).setConstant(std::numbers::pi / 2);
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  const Batch x = checks::random_batch(rng, 2, 3, 6);
  const Batch y = layer.forward(x);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) {
        const Eigen::Vector3d q = x[b].block<1, 3>(i, 3 * j).transpose();
        EXPECT_LT(max_abs(y[b].block<1, 3>(i, 3 * j).transpose() - rx * q), 1e-15);
      }
}

TEST(Transform, NonRigidMatrixScalesByKernel) {
  Rng rng(3);
  TransformLayer layer(TransformVariant::NonRigidMatrix, 4, 3);
  layer.params() *= 2.0;
  const Batch x = checks::random_batch(rng, 2, 4, 9);
  const Batch y = layer.forward(x);
  for (int b = 0; b < 2; ++b) EXPECT_EQ(max_abs(y[b] - 2.0 * x[b]), 0.0);
}

TEST(Transform, NonRigidKernelsAreIndependentPerJoint) {
  Rng rng(4);
  TransformLayer layer(TransformVariant::NonRigidAngle, 2, 3);
  // Only frame 1, joint 2 gets a rotation.
  layer.params().row(1 * 3 + 2) << 0.0, 0.0, 0.7;
  const Batch x = checks::random_batch(rng, 1, 2, 9);
  const Batch y = layer.forward(x);
  EXPECT_EQ(max_abs(y[0].row(0) - x[0].row(0)), 0.0);
  EXPECT_EQ(max_abs(y[0].block<1, 6>(1, 0) - x[0].block<1, 6>(1, 0)), 0.0);
  const Eigen::Vector3d q = x[0].block<1, 3>(1, 6).transpose();
  EXPECT_LT(max_abs(y[0].block<1, 3>(1, 6).transpose() - rotation_z(0.7) * q), 1e-15);
}

TEST(Transform, RigidAnglePreservesJointNorms) {
  Rng rng(5);
  TransformLayer layer(TransformVariant::RigidAngle, 5, 4);
  layer.params() = checks::random_matrix(rng, 5, 3, 3.0);
  const Batch x = checks::random_batch(rng, 2, 5, 12);
  const Batch y = layer.forward(x);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) {
        const double before = x[b].block<1, 3>(i, 3 * j).norm();
        const double after = y[b].block<1, 3>(i, 3 * j).norm();
        EXPECT_NEAR(after, before, 1e-13);
      }
}

TEST(Transform, ZeroUpstreamGivesZeroGradients) {
  Rng rng(6);
  TransformLayer layer(TransformVariant::NonRigidAngle, 3, 2);
  layer.params() = checks::random_matrix(rng, 6, 3);
  const Batch x = checks::random_batch(rng, 2, 3, 6);
  const Batch up(2, Eigen::MatrixXd::Zero(3, 6));
  const auto g = layer.backward(x, up);
  EXPECT_EQ(max_abs(g.params), 0.0);
  EXPECT_EQ(max_abs(g.input, up), 0.0);
}

TEST(Transform, IdentityKernelsPassGradientThrough) {
  Rng rng(7);
  const TransformLayer layer(TransformVariant::RigidMatrix, 3, 2);
  const Batch x = checks::random_batch(rng, 2, 3, 6);
  const Batch up = checks::random_batch(rng, 2, 3, 6);
  EXPECT_EQ(max_abs(layer.backward(x, up).input, up), 0.0);
}

TEST(Transform, RejectsWrongShape) {
  const TransformLayer layer(TransformVariant::RigidMatrix, 3, 2);
  EXPECT_THROW(layer.forward({Eigen::MatrixXd::Zero(3, 5)}), DimensionError);
  EXPECT_THROW(TransformLayer(TransformVariant::RigidAngle, 0, 2), DimensionError);
  EXPECT_EQ(transform_variant_from_string("nonrigid_angle"), TransformVariant::NonRigidAngle);
  EXPECT_THROW(transform_variant_from_string("affine"), DomainError);
}

TEST(Conv, DeltaKernelIsRelu) {
  Rng rng(8);
  Conv1DLayer conv(4, 4, 3);
  for (int c = 0; c < 4; ++c) conv.weight(c, c, 1) = 1.0;
  const Batch x = checks::random_batch(rng, 2, 7, 4);
  const Batch y = conv.forward(x);
  for (int b = 0; b < 2; ++b) EXPECT_EQ(max_abs(y[b] - Eigen::MatrixXd(x[b].cwiseMax(0.0))), 0.0);
}

TEST(Conv, ConstantInputInterior) {
  Conv1DLayer conv(3, 2, 5);
  conv.weights().setConstant(0.25);
  conv.bias() << 0.5, -10.0;
  const Batch y = conv.forward({Eigen::MatrixXd::Constant(9, 3, 2.0)});
  for (int t = 2; t < 7; ++t) {
    EXPECT_DOUBLE_EQ(y[0](t, 0), 15 * 0.25 * 2.0 + 0.5);
    EXPECT_EQ(y[0](t, 1), 0.0);
  }
  // Zero padding at the edges: two taps fall outside.
  EXPECT_DOUBLE_EQ(y[0](0, 0), 9 * 0.25 * 2.0 + 0.5);
}

TEST(Conv, MatchesNaiveLoop) {
  Rng rng(9);
  for (int k : {1, 3, 5}) {
    Conv1DLayer conv(3, 4, k);
    conv.init(rng);
    conv.bias() = checks::random_matrix(rng, 4, 1, 0.1);
    const Batch x = checks::random_batch(rng, 2, 8, 3);
    const Batch y = conv.forward(x);
    const int pad = k / 2;
    for (int b = 0; b < 2; ++b)
      for (int t = 0; t < 8; ++t)
        for (int o = 0; o < 4; ++o) {
          double s = conv.bias()(o, 0);
          for (int tap = 0; tap < k; ++tap) {
            const int src = t + tap - pad;
            if (src < 0 || src >= 8) continue;
            for (int c = 0; c < 3; ++c) s += conv.weight(o, c, tap) * x[b](src, c);
          }
          EXPECT_NEAR(y[b](t, o), std::max(s, 0.0), 1e-12);
        }
  }
}

TEST(Conv, LinearBeforeActivationWithZeroBias) {
  Rng rng(10);
  Conv1DLayer conv(2, 3, 3);
  conv.init(rng);
  conv.bias().setZero();
  const Batch x = checks::random_batch(rng, 1, 6, 2);
  const Batch y1 = conv.forward(x);
  const Batch y3 = conv.forward({3.0 * x[0]});
  EXPECT_LT(max_abs(y3[0] - 3.0 * y1[0]), 1e-12);
}

TEST(Conv, RejectsEvenKernelAndWrongChannels) {
  EXPECT_THROW(Conv1DLayer(2, 2, 4), DimensionError);
  const Conv1DLayer conv(2, 2, 3);
  EXPECT_THROW(conv.forward({Eigen::MatrixXd::Zero(5, 3)}), DimensionError);
}

TEST(Pool, MonotoneInputPicksSecondOfEachPair) {
  Eigen::MatrixXd x(8, 2);
  for (int t = 0; t < 8; ++t) x.row(t) << t, 10.0 * t;
  const MaxPool1D pool(2);
  const Batch y = pool.forward({x});
  ASSERT_EQ(y[0].rows(), 4);
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(y[0](r, 0), 2 * r + 1);
    EXPECT_EQ(y[0](r, 1), 10.0 * (2 * r + 1));
  }
}

TEST(Pool, TieRoutesGradientToEarlierIndex) {
  Eigen::MatrixXd x(4, 1);
  x << 1.0, 1.0, -2.0, 3.0;
  const MaxPool1D pool(2);
  const Batch g = pool.backward({x}, {Eigen::MatrixXd::Constant(2, 1, 5.0)});
  Eigen::MatrixXd expected(4, 1);
  expected << 5.0, 0.0, 0.0, 5.0;
  EXPECT_EQ(g[0], expected);
}

TEST(Pool, DropsTrailingOddFrame) {
  const MaxPool1D pool(2);
  EXPECT_EQ(pool.forward({Eigen::MatrixXd::Ones(7, 3)})[0].rows(), 3);
}

TEST(LSTM, ZeroWeightsGiveZeroOutput) {
  Rng rng(11);
  const LSTMLayer lstm(5, 4);
  EXPECT_EQ(max_abs(lstm.forward(checks::random_batch(rng, 3, 6, 5))), 0.0);
}

TEST(LSTM, SingleStepOracle) {
  Rng rng(12);
  LSTMLayer lstm(3, 2);
  lstm.init(rng);
  lstm.bias() = checks::random_matrix(rng, 8, 1, 0.5);
  lstm.u() = checks::random_matrix(rng, 8, 2);  // unused at T = 1 since h_0 = 0
  const Batch x = checks::random_batch(rng, 2, 1, 3);
  const Eigen::MatrixXd h = lstm.forward(x);
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < 2; ++k) {
      double z[4];
      for (int gate = 0; gate < 4; ++gate) {
        const int row = gate * 2 + k;
        z[gate] = lstm.bias()(row, 0);
        for (int f = 0; f < 3; ++f) z[gate] += lstm.w()(row, f) * x[b](0, f);
      }
      const double c = sigmoid(z[0]) * std::tanh(z[2]);
      EXPECT_NEAR(h(b, k), sigmoid(z[3]) * std::tanh(c), 1e-12);
    }
  }
}

TEST(LSTM, TwoStepRecurrenceOracle) {
  Rng rng(13);
  LSTMLayer lstm(2, 1);
  lstm.w() = checks::random_matrix(rng, 4, 2);
  lstm.u() = checks::random_matrix(rng, 4, 1);
  lstm.bias() = checks::random_matrix(rng, 4, 1);
  const Batch x = checks::random_batch(rng, 1, 2, 2);
  double h = 0.0, c = 0.0;
  for (int t = 0; t < 2; ++t) {
    double z[4];
    for (int gate = 0; gate < 4; ++gate) {
      z[gate] = lstm.bias()(gate, 0) + lstm.u()(gate, 0) * h + lstm.w()(gate, 0) * x[0](t, 0) +
                lstm.w()(gate, 1) * x[0](t, 1);
    }
    c = sigmoid(z[1]) * c + sigmoid(z[0]) * std::tanh(z[2]);
    h = sigmoid(z[3]) * std::tanh(c);
  }
  EXPECT_NEAR(lstm.forward(x)(0, 0), h, 1e-14);
}

TEST(Dense, IdentityAndBias) {
  Rng rng(14);
  DenseLayer dense(3, 3);
  dense.weights().setIdentity();
  const Eigen::MatrixXd x = checks::random_matrix(rng, 4, 3);
  EXPECT_EQ(dense.forward(x), x);
  dense.weights().setZero();
  dense.bias() << 1, 2, 3;
  const Eigen::MatrixXd y = dense.forward(Eigen::MatrixXd::Zero(2, 3));
  for (int b = 0; b < 2; ++b) EXPECT_EQ(y.row(b), dense.bias().transpose());
}

TEST(Loss, UniformLogitsGiveLogK) {
  for (int k : {2, 3, 7}) {
    const auto r = softmax_cross_entropy(Eigen::MatrixXd::Constant(3, k, 1.5), {0, 1, 1});
    EXPECT_NEAR(r.loss, std::log(static_cast<double>(k)), 1e-15);
    EXPECT_NEAR(r.grad.sum(), 0.0, 1e-15);
  }
}

TEST(Loss, ConfidentCorrectLogitIsNearlyFree) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(1, 4);
  logits(0, 2) = 50.0;
  const auto r = softmax_cross_entropy(logits, {2});
  EXPECT_GT(r.loss, 0.0);
  EXPECT_LT(r.loss, 1e-20);
  // Large logits do not overflow.
  logits(0, 2) = 1e4;
  EXPECT_TRUE(std::isfinite(softmax_cross_entropy(logits, {0}).loss));
  EXPECT_NEAR(softmax_cross_entropy(logits, {0}).loss, 1e4, 1e-9);
}

TEST(Loss, RejectsBadLabels) {
  EXPECT_THROW(softmax_cross_entropy(Eigen::MatrixXd::Zero(1, 3), {3}), DomainError);
  EXPECT_THROW(softmax_cross_entropy(Eigen::MatrixXd::Zero(1, 3), {-1}), DomainError);
  EXPECT_THROW(softmax_cross_entropy(Eigen::MatrixXd::Zero(2, 3), {0}), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 0.3);
  const Eigen::MatrixXd before = p;
  AdamState s;
  s.learning_rate = 0.1;
  for (int i = 0; i < 3; ++i) adam_step({&p}, {Eigen::MatrixXd::Zero(2, 2)}, s);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 3);
}

TEST(Adam, HandComputedSteps) {
  // Decimal-arithmetic reference for lr 0.1, g = 0.5 then g = -1.
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 1.0);
  AdamState s;
  s.learning_rate = 0.1;
  adam_step({&p}, {Eigen::MatrixXd::Constant(1, 1, 0.5)}, s);
  EXPECT_NEAR(p(0, 0), 0.90000000199999996, 1e-15);
  adam_step({&p}, {Eigen::MatrixXd::Constant(1, 1, -1.0)}, s);
  EXPECT_NEAR(p(0, 0), 0.93661035424056560, 1e-15);
}

TEST(Adam, RejectsMismatchedShapes) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  AdamState s;
  EXPECT_THROW(adam_step({&p}, {Eigen::MatrixXd::Zero(2, 3)}, s), DimensionError);
  EXPECT_THROW(adam_step({&p}, {}, s), DimensionError);
}

TEST(Gradients, LayerAndEndToEndChecks) {
  const auto rep = checks::gradient_suite();
  for (const auto& r : rep.results) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured;
}

TEST(Gradients, AngleKernelsStayOnSO3) {
  const auto rep = checks::so3_suite();
  for (const auto& r : rep.results) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured;
}
