#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "ifield/fieldline.hpp"

using namespace ifield;

namespace {

IntegrableSystem model(ModelKind k, double rho_eps = 0.0) {
  ModelSpec s;
  s.kind = k;
  s.rho_eps = rho_eps;
  return make_model(s);
}

Mat2 rot(double a) {
  Mat2 R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

}  // namespace

TEST(Trace, ModelARotatesRigidlyWithDensityProfile) {
  const auto sys = model(ModelKind::A, 0.1);
  const double r = 0.2, iota = 0.3 + 0.1 * 0.02;
  const Trace tr = trace(sys.B, Point{r, 0.0, 0.0}, 3 * kTwoPi, 12);
  ASSERT_EQ(tr.points.size(), 13u);
  for (const auto& q : tr.points) {
    EXPECT_NEAR(q.x, r * std::cos(iota * q.phi), 1e-10);
    EXPECT_NEAR(q.y, r * std::sin(iota * q.phi), 1e-10);
  }
  EXPECT_GT(tr.stats.steps, 0);
}

TEST(Trace, ModelBExponential) {
  const auto sys = model(ModelKind::B);
  const Trace tr = trace(sys.B, Point{0.01, 0.02, 0.0}, kTwoPi, 4);
  const auto& q = tr.points.back();
  EXPECT_NEAR(q.x, 0.01 * std::exp(0.1 * kTwoPi), 1e-12);
  EXPECT_NEAR(q.y, 0.02 * std::exp(-0.1 * kTwoPi), 1e-12);
}

TEST(Trace, Failures) {
  VectorField flat_b;
  flat_b.eval = [](const Point& q) { return Vec3(1.0, 0.0, q.x); };
  try {
    trace(flat_b, Point{0.0, 0.0, 0.0}, 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TorBFieldVanishes);
  }
  TraceOptions opt;
  opt.r_max = 1.0;
  try {
    trace(model(ModelKind::B).B, Point{0.5, 0.0, 0.0}, 20 * kTwoPi, 1, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainExit);
  }
}

TEST(Poincare, JacobianMatchesFiniteDifference) {
  const auto sys = pushforward(model(ModelKind::C), make_wobble(0.05));
  const Vec2 z(0.1, -0.05);
  const auto pr = poincare_map(sys.B, z, true);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h;
    const Vec2 col = (poincare_map(sys.B, z + e, false).point - poincare_map(sys.B, z - e, false).point) / (2 * h);
    EXPECT_LT((col - pr.jacobian->col(j)).norm(), 1e-7);
  }
  EXPECT_NEAR(pr.jacobian->determinant(), 1.0, 1e-10);
}

TEST(Axis, ModelAMonodromyIsRotation) {
  const auto sys = model(ModelKind::A);
  const auto axis = find_axis(sys.B, Vec2(0.05, -0.02));
  EXPECT_LT(axis.at(1.0).norm(), 1e-11);
  const auto mm = monodromy(sys.B, axis);
  EXPECT_LT((mm.m - rot(kTwoPi * 0.3)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(mm.det(), 1.0, 1e-10);
}

TEST(Axis, DisguisedAxisFollowsWobbleAndShear) {
  const DiffeoPtr d = compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)});
  const auto sys = pushforward(model(ModelKind::A), d);
  const auto axis = find_axis(sys.B, Vec2(0.0, 0.0));
  for (double phi : {0.0, 0.7, 2.0, 4.5}) {
    const Point img = d->forward(Point{0.0, 0.0, phi});
    EXPECT_LT((axis.at(phi) - Vec2(img.x, img.y)).norm(), 1e-10);
  }
  // Newton converges quadratically: residual sequence decays super-linearly
  ASSERT_GE(axis.newton_residuals.size(), 2u);
  const auto rep = classify_axis(sys, axis);
  EXPECT_EQ(rep.kind, AxisKind::Elliptic);
  EXPECT_NEAR(rep.iota0, 0.3, 1e-10);
  EXPECT_NEAR(rep.hessian_c, 1.0, 1e-7);
  EXPECT_LT(rep.hessian_c_spread, 1e-7);
}

TEST(Axis, ModelBAndCClassification) {
  const auto b = model(ModelKind::B);
  const auto rb = classify_axis(b, find_axis(b.B, Vec2(0.01, 0.01)));
  EXPECT_EQ(rb.kind, AxisKind::DirectHyperbolic);
  EXPECT_NEAR(rb.monodromy.m(0, 0), std::exp(0.1 * kTwoPi), 1e-10);
  EXPECT_NEAR(rb.monodromy.m(1, 1), std::exp(-0.1 * kTwoPi), 1e-10);
  EXPECT_NEAR(rb.hessian_c, 0.1, 1e-8);
  EXPECT_EQ(rb.hessian_pos, 1);
  EXPECT_EQ(rb.hessian_neg, 1);

  const auto c = model(ModelKind::C);
  const auto rc = classify_axis(c, find_axis(c.B, Vec2(0.01, 0.0)));
  EXPECT_EQ(rc.kind, AxisKind::ReflectionHyperbolic);
  // independent oracle: in the frame rotating at half speed the field is
  // autonomous, u' = K u with K = diag(k, -k), so M = R(pi) exp(2 pi K)
  Eigen::Matrix2d K;
  K << 0.1, 0.0, 0.0, -0.1;
  const Mat2 expect = rot(kPi) * (kTwoPi * K).exp();
  EXPECT_LT((rc.monodromy.m - expect).cwiseAbs().maxCoeff(), 1e-9);
  ASSERT_TRUE(rc.monodromy.cover.has_value());
  EXPECT_NEAR(rc.monodromy.cover->trace(), 2.0 * std::cosh(2.0 * kTwoPi * 0.1), 1e-8);
  EXPECT_NEAR(rc.hessian_c, 0.1, 1e-8);
}

TEST(Axis, AMhsHessianScale) {
  const auto s = model(ModelKind::A_MHS);
  const auto r = classify_axis(s, find_axis(s.B, Vec2(0.0, 0.0)));
  EXPECT_NEAR(r.hessian_c, 2 * 0.09, 1e-9);
  EXPECT_EQ(r.hessian_neg, 2);
}

TEST(Axis, SingularJacobianWhenLinearPartIsIdentity) {
  // iota0 = 1 rotation with resonant forcing: DP = I but P(z) != z
  VectorField b;
  b.eval = [](const Point& q) {
    return Vec3(-q.y + 0.01 * std::cos(q.phi), q.x + 0.01 * std::sin(q.phi), 1.0);
  };
  try {
    find_axis(b, Vec2(0.1, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularJacobian);
  }
}

TEST(Axis, InconsistentClassificationIsReported) {
  auto sys = model(ModelKind::A);
  sys.p = model(ModelKind::B).p;
  try {
    classify_axis(sys, find_axis(sys.B, Vec2(0.0, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentClassification);
  }
}

TEST(Iota, FieldLineRotationNumber) {
  const auto sys = model(ModelKind::A);
  const auto axis = find_axis(sys.B, Vec2(0.0, 0.0));
  const auto est = iota_fieldline(sys.B, Vec2(0.2, 0.0), 50, axis);
  EXPECT_NEAR(est.iota, 0.302, 1e-10);
  EXPECT_NEAR(est.iota_linear_fit, 0.302, 1e-10);
}

TEST(Iota, DisguisedFieldLineRotationNumber) {
  const DiffeoPtr d = compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)});
  const auto sys = pushforward(model(ModelKind::A), d);
  const auto axis = find_axis(sys.B, Vec2(0.0, 0.0));
  const Point seed = d->forward(Point{0.2, 0.0, 0.0});
  const auto est = iota_fieldline(sys.B, Vec2(seed.x, seed.y), 200, axis);
  EXPECT_NEAR(est.iota, 0.302, 1e-8);
}
