#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kshape/checks.hpp"
#include "kshape/geometry.hpp"

using namespace kshape;

namespace {

Landmarks landmarks(std::initializer_list<std::array<double, 3>> pts) {
  Landmarks x(static_cast<Eigen::Index>(pts.size()), 3);
  Eigen::Index i = 0;
  for (const auto& p : pts) x.row(i++) << p[0], p[1], p[2];
  return x;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

// Values frozen from tests/oracles/geometry_oracle.py (40-digit mpmath).
const Landmarks kX = landmarks({{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
const Landmarks kY = landmarks({{1, 1, 0}, {0, 1, 0}, {2, 0, 1}, {0, -1, 1}});
const Eigen::VectorXd kXPre = vec({-0.21821789023599238, 0.0, 0.0, 0.12598815766974241, -0.50395263067896964, 0.0,
                                   0.089087080637474795, 0.17817416127494959, -0.80178372573727315});
const Eigen::VectorXd kYPre = vec({0.27735009811261456, 0.0, 0.0, -0.4803844614152614, 0.32025630761017427,
                                   -0.32025630761017427, 0.33968311024337873, 0.56613851707229788,
                                   -0.22645540682891915});
const double kTheta = 1.5405303296099024;
const Eigen::VectorXd kLog = vec({0.43763967409366797, 0.0, 0.0, -0.74626199355923232, 0.51709492467096413,
                                  -0.49359060991319303, 0.51937688601134333, 0.8642431383228753,
                                  -0.311626131606806});
const Eigen::VectorXd kU = vec({-0.061504786447324129, 0.2, 0.3, 0.49324483193077561, 0.12702067227689756, 0.6,
                                0.76593405296885135, 0.9318681059377027, 0.30659352328033787});
const Eigen::VectorXd kTransported = vec({-0.07945985298942657, 0.2, 0.3, 0.60085470216093196, 0.18279873000005148,
                                          0.69724350772875586, 0.63574109070709014, 0.70586295328486515,
                                          0.61881088686906727});

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Helmert, SmallCasesMatchClosedForm) {
  const double r2 = 1 / std::sqrt(2.0), r6 = 1 / std::sqrt(6.0);
  Eigen::MatrixXd h2(1, 2);
  h2 << r2, -r2;
  EXPECT_LT(max_abs(helmert_submatrix(2) - h2), 1e-15);
  Eigen::MatrixXd h3(2, 3);
  h3 << r2, -r2, 0, r6, r6, -2 * r6;
  EXPECT_LT(max_abs(helmert_submatrix(3) - h3), 1e-15);
}

TEST(Helmert, OrthonormalRowsOrthogonalToConstants) {
  for (int n = 2; n < 60; ++n) {
    const Eigen::MatrixXd h = helmert_submatrix(n);
    EXPECT_LT(max_abs(h * h.transpose() - Eigen::MatrixXd::Identity(n - 1, n - 1)), 1e-12) << n;
    EXPECT_LT(max_abs(h * Eigen::VectorXd::Ones(n)), 1e-12) << n;
  }
}

TEST(Helmert, RejectsTooFewLandmarks) {
  EXPECT_THROW(helmert_submatrix(1), DimensionError);
  EXPECT_THROW(helmert_submatrix(0), DimensionError);
}

TEST(PreShape, ThreePointExample) {
  const PreShape p = to_preshape(landmarks({{1, 0, 0}, {-1, 0, 0}, {0, 0, 0}}));
  EXPECT_LT(max_abs(p.flat() - vec({1, 0, 0, 0, 0, 0})), 1e-15);
}

TEST(PreShape, MatchesHighPrecisionOracle) {
  EXPECT_LT(max_abs(to_preshape(kX).flat() - kXPre), 1e-15);
  EXPECT_LT(max_abs(to_preshape(kY).flat() - kYPre), 1e-15);
}

TEST(PreShape, AlreadyNormalizedIsIdentity) {
  const Landmarks x = landmarks({{1, 0, 0}, {-1, 0, 0}, {0, 0, 0}}) / std::sqrt(2.0);
  const Eigen::MatrixXd hx = helmert_submatrix(3) * x;
  ASSERT_NEAR(hx.norm(), 1.0, 1e-15);
  EXPECT_LT(max_abs(to_preshape(x).coords() - hx), 1e-15);
}

TEST(PreShape, DegenerateConfigurationThrows) {
  EXPECT_THROW(to_preshape(landmarks({{2, 3, 4}, {2, 3, 4}, {2, 3, 4}})), ZeroNormError);
}

TEST(PreShape, UnitNormAndInvariances) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const Landmarks x = checks::random_landmarks(rng, 25);
    const PreShape p = to_preshape(x);
    EXPECT_NEAR(p.flat().norm(), 1.0, 1e-12);
    Landmarks moved = rng.uniform(0.1, 10.0) * x;
    moved.rowwise() += Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal()) * 5.0;
    EXPECT_LT(max_abs(to_preshape(moved).flat() - p.flat()), 1e-12);
  }
}

TEST(GeodesicDistance, BasicValues) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_EQ(geodesic_distance(x, x), 0.0);
  const PreShape a = PreShape::from_flat(vec({1, 0, 0, 0, 0, 0}));
  const PreShape b = PreShape::from_flat(vec({0, 0, 0, 0, 1, 0}));
  EXPECT_NEAR(geodesic_distance(a, b), std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(geodesic_distance(x, PreShape::from_flat(kYPre)), kTheta, 1e-14);
}

TEST(GeodesicDistance, MatchesArccosOfInnerProduct) {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const PreShape x = checks::random_preshape(rng, 10), y = checks::random_preshape(rng, 10);
    double dot = 0.0;
    for (int i = 0; i < x.dim(); ++i) dot += x.flat()(i) * y.flat()(i);
    EXPECT_NEAR(geodesic_distance(x, y), std::acos(dot), 1e-12);
  }
}

TEST(LogMap, MatchesHighPrecisionOracle) {
  const TangentVector v = log_map(PreShape::from_flat(kXPre), PreShape::from_flat(kYPre));
  EXPECT_LT(max_abs(v.vec - kLog), 1e-14);
  EXPECT_NEAR(v.vec.norm(), kTheta, 1e-14);
}

TEST(LogMap, SamePointGivesZero) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_EQ(max_abs(log_map(x, x).vec), 0.0);
}

TEST(LogMap, AntipodalThrows) {
  const PreShape x = PreShape::from_flat(kXPre);
  const PreShape minus = PreShape::from_flat(-kXPre);
  EXPECT_THROW(log_map(x, minus), UndefinedMapError);
  EXPECT_THROW(parallel_transport(x, minus, kU), UndefinedMapError);
}

TEST(LogMap, SmallAngleBranchStaysAccurate) {
  Rng rng(3);
  const PreShape x = checks::random_preshape(rng, 25);
  for (double angle : {1e-12, 1e-9, 5e-8, 2e-7, 1e-5}) {
    const Eigen::VectorXd w = checks::random_tangent(rng, x, angle);
    const PreShape y = exp_map(x, w);
    const TangentVector v = log_map(x, y);
    EXPECT_LT(max_abs(v.vec - w), 1e-15) << angle;
    EXPECT_NEAR(v.vec.norm(), geodesic_distance(x, y), 1e-15) << angle;
  }
}

TEST(ExpMap, ZeroAndAntipode) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_EQ(max_abs(exp_map(x, Eigen::VectorXd::Zero(9)).flat() - x.flat()), 0.0);
  const Eigen::VectorXd w = kU.normalized() * std::numbers::pi;
  EXPECT_LT(max_abs(exp_map(x, w).flat() + x.flat()), 1e-15);
}

TEST(ExpMap, RejectsNonTangentVector) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_THROW(exp_map(x, kXPre * 0.1), DomainError);
  EXPECT_THROW(exp_map(x, Eigen::VectorXd::Zero(6)), DimensionError);
}

TEST(ExpLog, RoundTripsOnRandomPairs) {
  Rng rng(4);
  for (int k = 0; k < 1000; ++k) {
    const PreShape x = checks::random_preshape(rng, 25), y = checks::random_preshape(rng, 25);
    const TangentVector v = log_map(x, y);
    ASSERT_LT(std::abs(v.vec.dot(x.flat())), 1e-10);
    ASSERT_LT(max_abs(exp_map(v).flat() - y.flat()), 1e-10);
    const Eigen::VectorXd w = checks::random_tangent(rng, x, rng.uniform(0.0, 3.1));
    ASSERT_LT(max_abs(log_map(x, exp_map(x, w)).vec - w), 1e-10);
  }
}

TEST(ParallelTransport, MatchesHighPrecisionOracle) {
  const PreShape x = PreShape::from_flat(kXPre), y = PreShape::from_flat(kYPre);
  EXPECT_LT(max_abs(parallel_transport(x, y, kU).vec - kTransported), 1e-14);
}

TEST(ParallelTransport, IdentityWhenEndpointsCoincide) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_EQ(max_abs(parallel_transport(x, x, kU).vec - kU), 0.0);
}

TEST(ParallelTransport, LogVectorMapsToMinusReverseLog) {
  const PreShape x = PreShape::from_flat(kXPre), y = PreShape::from_flat(kYPre);
  const TangentVector moved = parallel_transport(y, log_map(x, y));
  EXPECT_LT(max_abs(moved.vec + log_map(y, x).vec), 1e-14);
}

TEST(ParallelTransport, IsometryAndTargetTangency) {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const PreShape x = checks::random_preshape(rng, 25), y = checks::random_preshape(rng, 25);
    const Eigen::VectorXd u = checks::random_tangent(rng, x, 1.0), w = checks::random_tangent(rng, x, 0.5);
    const Eigen::VectorXd pu = parallel_transport(x, y, u).vec, pw = parallel_transport(x, y, w).vec;
    ASSERT_NEAR(pu.dot(pw), u.dot(w), 1e-9);
    ASSERT_LT(std::abs(pu.dot(y.flat())), 1e-9);
  }
}

TEST(ParallelTransport, LinearThetaNormalizationBreaksIsometry) {
  checks::GeometryOptions opt;
  opt.pairs = 50;
  opt.procrustes_trials = opt.euler_trials = opt.jacobian_trials = 1;
  opt.transport = TransportNormalization::ThetaLinear;
  const auto rep = checks::geometry_suite(opt);
  for (const auto& r : rep.results) {
    if (r.name == "geometry.transport_isometry") EXPECT_FALSE(r.passed()) << r.measured;
  }
}

TEST(Procrustes, IdentityForSameShape) {
  const PreShape x = PreShape::from_flat(kXPre);
  EXPECT_LT(max_abs(procrustes_rotation(x, x).rotation.matrix() - Eigen::Matrix3d::Identity()), 1e-12);
}

TEST(Procrustes, RecoversPlantedRotation) {
  Rng rng(6);
  for (int k = 0; k < 500; ++k) {
    const PreShape x = checks::random_preshape(rng, 25);
    const Eigen::Matrix3d r = random_rotation(rng);
    // y = x * r, i.e. every row rotated by r^T; aligning y needs r.
    const PreShape y = rotate(x, Rotation3::unchecked(r.transpose()));
    const ProcrustesResult found = procrustes_rotation(x, y);
    ASSERT_LT(max_abs(found.rotation.matrix() - r), 1e-8);
    ASSERT_LT(geodesic_distance(x, rotate(y, found.rotation)), 1e-9);
    ASSERT_FALSE(found.degenerate);
  }
}

TEST(Procrustes, ReflectedPlanarShapeGivesProperRotation) {
  const PreShape x = to_preshape(landmarks({{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {1, 3, 0}, {-2, 1, 0}}));
  Landmarks mirrored = x.coords();
  mirrored.col(0) *= -1.0;
  const PreShape y = PreShape::from_flat(Eigen::Map<const Eigen::VectorXd>(mirrored.data(), mirrored.size()));
  const ProcrustesResult found = procrustes_rotation(x, y);
  EXPECT_NEAR(found.rotation.matrix().determinant(), 1.0, 1e-12);
  EXPECT_LT(geodesic_distance(x, rotate(y, found.rotation)), 1e-9);
}

TEST(Procrustes, NeverIncreasesDistance) {
  Rng rng(7);
  for (int k = 0; k < 300; ++k) {
    const PreShape x = checks::random_preshape(rng, 8), y = checks::random_preshape(rng, 8);
    const auto r = procrustes_rotation(x, y).rotation;
    ASSERT_LE(geodesic_distance(x, rotate(y, r)), geodesic_distance(x, y) + 1e-12);
  }
}

TEST(Procrustes, CollinearConfigurationIsFlaggedDegenerate) {
  const PreShape x = to_preshape(landmarks({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}}));
  EXPECT_TRUE(procrustes_rotation(x, x).degenerate);
}

TEST(Euler, ClosedFormValues) {
  EXPECT_EQ(max_abs(rotation_from_euler({0, 0, 0}).matrix() - Eigen::Matrix3d::Identity()), 0.0);
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_LT(max_abs(rotation_from_euler({std::numbers::pi / 2, 0, 0}).matrix() - rx), 1e-15);
}

TEST(Euler, CompositionOrderIsZYX) {
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    const EulerAngles a = checks::random_angles(rng);
    // Independent factor matrices written out entry by entry.
    const double ca = std::cos(a.alpha), sa = std::sin(a.alpha), cb = std::cos(a.beta), sb = std::sin(a.beta);
    const double cg = std::cos(a.gamma), sg = std::sin(a.gamma);
    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
    ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
    rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
    ASSERT_LT(max_abs(rotation_from_euler(a).matrix() - rz * ry * rx), 1e-15);
  }
}

TEST(Euler, AlwaysInSO3) {
  Rng rng(9);
  for (int k = 0; k < 10000; ++k) {
    const Eigen::Matrix3d r = rotation_from_euler(checks::random_angles(rng)).matrix();
    ASSERT_LT(max_abs(r.transpose() * r - Eigen::Matrix3d::Identity()), 1e-12);
    ASSERT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(EulerJacobian, GeneratorsAtIdentity) {
  const auto j = rotation_euler_jacobian({0, 0, 0});
  Eigen::Matrix3d gx, gz;
  gx << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  gz << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  EXPECT_LT(max_abs(j[0] - gx), 1e-15);
  EXPECT_LT(max_abs(j[2] - gz), 1e-15);
}

TEST(GeometrySuite, AllPropertiesPass) {
  const auto rep = checks::geometry_suite();
  for (const auto& r : rep.results) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured;
}

TEST(Rotation3, FromMatrixValidates) {
  EXPECT_NO_THROW(Rotation3::from_matrix(rotation_z(0.3)));
  EXPECT_THROW(Rotation3::from_matrix(2.0 * Eigen::Matrix3d::Identity()), DomainError);
  EXPECT_THROW(Rotation3::from_matrix(Eigen::Vector3d(1, 1, -1).asDiagonal()), DomainError);
}
