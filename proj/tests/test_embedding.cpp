#include <gtest/gtest.h>

#include "ifield/embedding.hpp"

using namespace ifield;

namespace {

IntegrableSystem model(ModelKind k) {
  ModelSpec s;
  s.kind = k;
  return make_model(s);
}

std::vector<ExtendedPoint> lift(const std::vector<Point>& pts, double u) {
  std::vector<ExtendedPoint> out;
  for (const auto& q : pts) out.push_back({q, u});
  return out;
}

}  // namespace

TEST(Embedding, ModelAClosedForms) {
  const auto sys = model(ModelKind::A);
  const auto pts = sample_points(64, 0.3, 7);
  EmbedOptions opt;
  opt.samples = pts;
  opt.check_surface_condition = true;
  const auto ext = eta_embed(sys, eta_dphi(), opt, true);
  for (const auto& q : pts) {
    const ExtendedPoint z{q, 0.0};
    const Vec3 B = sys.B(q), J = sys.J(q);
    EXPECT_NEAR(two_form_dual(ext.beta(q))[2], 1.0, 1e-12);
    const Vec4 xh = hamiltonian_vf(ext, Hamiltonian::H, z);
    const Vec4 xp = hamiltonian_vf(ext, Hamiltonian::PTilde, z);
    EXPECT_LT((xh.head<3>() - B / B[2]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((xp.head<3>() - (J - (J[2] / B[2]) * B)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(xh[3], 0.0, 1e-14);
  }
  EXPECT_NEAR(check_symplectic(ext, lift(pts, 0.0)), 1.0, 1e-10);
  const auto rep = verify_embedding(sys, eta_dphi(), pts, true);
  EXPECT_LT(rep.max_xh, 1e-10);
  EXPECT_LT(rep.max_xp, 1e-10);
  EXPECT_LT(rep.max_poisson, 1e-10);
  EXPECT_LT(rep.max_antisymmetry, 1e-15);
  EXPECT_LT(rep.max_pfaffian_covolume, 1e-10);
  EXPECT_LT(rep.max_slice, 1e-15);
  EXPECT_LT(rep.max_d_omega, 1e-7);
  EXPECT_GT(rep.min_coisotropy, 0.5);
}

TEST(Embedding, UnitRhoModelAHasUnitPfaffian) {
  ModelSpec s;
  s.kind = ModelKind::A;
  s.rho_eps = 0.2;
  const auto sys = make_model(s);
  const auto pts = sample_points(32, 0.3, 3);
  const auto ext = eta_embed(sys, eta_dphi(), {}, true);
  // beta ^ dphi coefficient is rho B^phi = 1 independently of rho
  for (double u : {-0.1, 0.0, 0.1}) EXPECT_NEAR(check_symplectic(ext, lift(pts, u)), 1.0, 1e-10);
}

TEST(Embedding, DisguisedModelA) {
  const auto sys = pushforward(model(ModelKind::A), compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)}));
  const auto rep = verify_embedding(sys, eta_dphi(), sample_points(48, 0.25, 11), true);
  EXPECT_LT(rep.max_xh, 1e-7);
  EXPECT_LT(rep.max_xp, 1e-7);
  EXPECT_LT(rep.max_poisson, 1e-7);
  EXPECT_LT(rep.max_d_omega, 1e-7);
}

TEST(Embedding, ModelBPoissonBracket) {
  const auto rep = verify_embedding(model(ModelKind::B), eta_dphi(), sample_points(48, 0.3, 5), true);
  EXPECT_LT(rep.max_poisson, 1e-10);
  EXPECT_LT(rep.max_xh, 1e-10);
  EXPECT_LT(rep.max_xp, 1e-10);
}

TEST(Embedding, BFlatOnMhsModel) {
  const auto sys = model(ModelKind::A_MHS);
  const auto pts = sample_points(48, 0.3, 9);
  EmbedOptions opt;
  opt.samples = pts;
  opt.check_surface_condition = true;
  const auto ext = eta_embed(sys, eta_bflat(sys), opt);
  // d(B-flat) = 2 iota0 dx ^ dy
  const Vec3 de = ext.d_eta(pts[0]);
  EXPECT_NEAR(two_form_apply(de, Vec3::UnitX(), Vec3::UnitY()), 0.6, 1e-8);
  const auto rep = verify_embedding(sys, eta_bflat(sys), pts);
  EXPECT_LT(rep.max_xh, 1e-10);
  EXPECT_LT(rep.max_poisson, 1e-9);
  EXPECT_LT(rep.max_d_omega, 1e-7);
  EXPECT_GT(rep.u_band, 0.1);
  EXPECT_LT(rep.u_band, 1e3);
  // Pf stays one-signed inside the band and flips beyond it for some sample
  bool flipped = false;
  for (const auto& q : pts) {
    const double p0 = pfaffian(ext.omega4({q, 0.0}));
    EXPECT_GT(pfaffian(ext.omega4({q, 0.99 * rep.u_band})) * p0, 0.0);
    EXPECT_GT(pfaffian(ext.omega4({q, -0.99 * rep.u_band})) * p0, 0.0);
    flipped |= pfaffian(ext.omega4({q, 1.01 * rep.u_band})) * p0 <= 0.0 ||
               pfaffian(ext.omega4({q, -1.01 * rep.u_band})) * p0 <= 0.0;
  }
  EXPECT_TRUE(flipped);
}

TEST(Embedding, SurfaceConditionFailure) {
  auto sys = model(ModelKind::A);
  OneForm eta;
  eta.eval = [](const Point& q) { return Vec3(0.0, 0.0, 1.0 + 0.5 * q.x); };
  EmbedOptions opt;
  opt.samples = sample_points(16, 0.3, 1);
  opt.check_surface_condition = true;
  try {
    eta_embed(sys, eta, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EtaSurfaceCondition);
  }
  opt.check_surface_condition = false;
  EXPECT_NO_THROW(eta_embed(sys, eta, opt));
}

TEST(Embedding, DegenerateEta) {
  const auto sys = model(ModelKind::A);
  OneForm dx;
  dx.eval = [](const Point&) { return Vec3(1.0, 0.0, 0.0); };
  std::vector<Point> pts = sample_points(16, 0.3, 2);
  pts.push_back({0.2, 0.0, 0.5});
  EmbedOptions opt;
  opt.samples = pts;
  try {
    eta_embed(sys, dx, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EtaNotCovolume);
  }
  const auto ext = eta_embed(sys, dx);
  EXPECT_LT(check_symplectic(ext, lift(pts, 0.0)), 1e-12);
  try {
    hamiltonian_vf(ext, Hamiltonian::H, {pts.back(), 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularOmega);
  }
}

TEST(Embedding, LinearityAndProperties) {
  const auto sys = model(ModelKind::C);
  const auto ext = eta_embed(sys, eta_dphi(), {}, true);
  for (const auto& q : sample_points(16, 0.3, 4)) {
    for (double u : {-0.05, 0.0, 0.07}) {
      const ExtendedPoint z{q, u};
      const Mat4 a = ext.omega4(z);
      EXPECT_LT((a + a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
      // det = Pf^2
      EXPECT_NEAR(a.determinant(), std::pow(pfaffian(a), 2), 1e-12);
      // i_X omega = -df
      const Vec4 x = hamiltonian_vf(ext, Hamiltonian::PTilde, z);
      EXPECT_LT((x.transpose() * a + ext.dp_tilde(z).transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(poisson_bracket(ext, Hamiltonian::PTilde, Hamiltonian::H, z),
                  -poisson_bracket(ext, Hamiltonian::H, Hamiltonian::PTilde, z), 1e-15);
    }
  }
  EXPECT_LT(closedness_residual(ext, lift(sample_points(8, 0.3, 6), 0.05)), 1e-7);
}

TEST(Embedding, EmptySamples) { EXPECT_THROW(verify_embedding(model(ModelKind::A), eta_dphi(), {}), Error); }
