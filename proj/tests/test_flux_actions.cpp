#include <gtest/gtest.h>

#include "ifield/flux_actions.hpp"

using namespace ifield;

namespace {

IntegrableSystem model(ModelKind k) {
  ModelSpec s;
  s.kind = k;
  return make_model(s);
}

IntegrableSystem disguised_a() {
  return pushforward(model(ModelKind::A), compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)}));
}

Loop circle(double r, int sense) {
  Loop l;
  l.point = [r, sense](double t) { return Point{r * std::cos(t), sense * r * std::sin(t), 0.0}; };
  l.tangent = [r, sense](double t) { return Vec3(-r * std::sin(t), sense * r * std::cos(t), 0.0); };
  return l;
}

OneForm half_xdy() {
  OneForm a;
  a.eval = [](const Point& q) { return Vec3(-0.5 * q.y, 0.5 * q.x, 0.0); };
  return a;
}

ClosedOrbit origin_axis() {
  ClosedOrbit o;
  std::vector<Eigen::VectorXd> s(8, Eigen::VectorXd::Zero(2));
  for (int i = 0; i < 8; ++i) o.samples.push_back(Vec2::Zero());
  o.series = PeriodicSeries(s, kTwoPi);
  return o;
}

}  // namespace

TEST(LoopIntegral, ClosedFormCases) {
  const double r = 0.3;
  EXPECT_NEAR(loop_integral(half_xdy(), circle(r, 1)).value, 0.5 * r * r, 1e-14);
  EXPECT_NEAR(loop_integral(half_xdy(), circle(r, -1)).value, -0.5 * r * r, 1e-14);
  OneForm c;
  c.eval = [](const Point&) { return Vec3(0.0, 0.0, 0.7); };
  Loop tor;
  tor.homology = Loop::Homology::Toroidal;
  tor.point = [](double t) { return Point{0.1 * std::cos(t), 0.2, t}; };
  EXPECT_NEAR(loop_integral(c, tor).value, 0.7, 1e-12);
  ScalarField f;
  f.value = [](const Point& q) { return std::sin(3 * q.x) * std::cos(q.phi) + q.x * q.y; };
  EXPECT_NEAR(loop_integral(exact_form(f), tor).value, 0.0, 1e-12);
  EXPECT_NEAR(loop_integral(exact_form(f), circle(0.4, 1)).value, 0.0, 1e-12);
}

TEST(LoopIntegral, RejectsOpenLoopsAndSmallQuadrature) {
  Loop open;
  open.point = [](double t) { return Point{t, 0.0, 0.0}; };
  try {
    loop_integral(half_xdy(), open);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonClosedLoop);
  }
  EXPECT_THROW(loop_integral(half_xdy(), circle(0.1, 1), 8), Error);
}

TEST(Fluxes, ModelAClosedForms) {
  const auto geo = make_level_geometry(model(ModelKind::A));
  EXPECT_EQ(geo->orientation(), 1);
  EXPECT_NEAR(toroidal_flux(*geo, 0.02), 0.02, 1e-10);
  EXPECT_NEAR(poloidal_flux(*geo, 0.02), 0.3 * 0.02 + 0.05 * 0.0004, 1e-10);
  EXPECT_EQ(toroidal_flux(*geo, 0.0), 0.0);
  EXPECT_NEAR(poloidal_flux(*geo, 0.0), 0.0, 1e-14);
}

TEST(Fluxes, StokesFallbackAgrees) {
  const auto geo = make_level_geometry(model(ModelKind::A));
  FluxOptions fb;
  fb.force_fallback = true;
  for (double lv : {0.01, 0.03, 0.05, 0.08}) {
    EXPECT_NEAR(toroidal_flux(*geo, lv, fb), toroidal_flux(*geo, lv), 1e-8);
    EXPECT_NEAR(poloidal_flux(*geo, lv, fb), poloidal_flux(*geo, lv), 1e-8);
  }
  const auto dgeo = make_level_geometry(disguised_a());
  EXPECT_NEAR(toroidal_flux(*dgeo, 0.02, fb), 0.02, 1e-8);
  EXPECT_NEAR(poloidal_flux(*dgeo, 0.02, fb), 0.00602, 1e-8);
}

TEST(Fluxes, MissingPotentialWithFallbackDisabled) {
  auto sys = model(ModelKind::A);
  sys.alpha.reset();
  const auto geo = make_level_geometry(sys);
  FluxOptions opt;
  opt.allow_fallback = false;
  try {
    toroidal_flux(*geo, 0.02, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPotentialAndFallbackDisabled);
  }
  EXPECT_NEAR(toroidal_flux(*geo, 0.02), 0.02, 1e-8);
}

TEST(Fluxes, LevelOutOfRange) {
  const auto geo = make_level_geometry(model(ModelKind::A));
  try {
    toroidal_flux(*geo, -0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LevelOutOfRange);
  }
  EXPECT_THROW(toroidal_flux(*geo, 10.0), Error);
}

TEST(Fluxes, DisguiseInvariance) {
  const auto g0 = make_level_geometry(model(ModelKind::A));
  const auto g1 = make_level_geometry(disguised_a());
  for (double lv : {0.01, 0.04}) {
    EXPECT_NEAR(toroidal_flux(*g1, lv), toroidal_flux(*g0, lv), 1e-8);
    EXPECT_NEAR(poloidal_flux(*g1, lv), poloidal_flux(*g0, lv), 1e-8);
  }
}

TEST(Fluxes, GaugeInvariance) {
  auto sys = model(ModelKind::A);
  ScalarField f;
  f.value = [](const Point& q) { return std::sin(2 * q.x + q.phi) + q.x * q.y * std::cos(q.phi); };
  const OneForm a0 = *sys.alpha, df = exact_form(f);
  OneForm a1;
  a1.eval = [a0, df](const Point& q) -> Vec3 { return a0(q) + df(q); };
  const auto g0 = make_level_geometry(sys);
  sys.alpha = a1;
  const auto g1 = make_level_geometry(sys);
  EXPECT_NEAR(toroidal_flux(*g1, 0.03), toroidal_flux(*g0, 0.03), 1e-10);
  EXPECT_NEAR(poloidal_flux(*g1, 0.03), poloidal_flux(*g0, 0.03), 1e-10);
}

TEST(Fluxes, AMhsLinearPoloidalFlux) {
  const auto geo = make_level_geometry(model(ModelKind::A_MHS));
  const double psi = 0.03, level = -2 * 0.09 * psi;
  EXPECT_NEAR(toroidal_flux(*geo, level), psi, 1e-10);
  EXPECT_NEAR(poloidal_flux(*geo, level), 0.3 * psi, 1e-10);
  EXPECT_NEAR(level_for_flux(*geo, psi), level, 1e-12);
}

TEST(Profile, ModelAIotaMatchesAnalytic) {
  std::vector<double> levels;
  for (int i = 1; i <= 9; ++i) levels.push_back(0.01 * i);
  const auto geo = make_level_geometry(model(ModelKind::A));
  const auto prof = flux_profile(*geo, levels);
  const auto loop = flux_profile(*geo, levels, "loop");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EXPECT_NEAR(prof.psiT[i], levels[i], 1e-10);
    EXPECT_NEAR(prof.iota[i], 0.3 + 0.1 * levels[i], 1e-6);
    EXPECT_NEAR(loop.iota[i], 0.3 + 0.1 * levels[i], 1e-10);
    EXPECT_NEAR(prof.dpsiT_dlevel[i], 1.0, 1e-10);
  }
}

TEST(Profile, MatchesFieldLineIotaOnDisguisedModel) {
  const auto sys = disguised_a();
  const auto geo = make_level_geometry(sys);
  const std::vector<double> levels = {0.01, 0.02, 0.03, 0.04, 0.05};
  const auto prof = flux_profile(*geo, levels);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Point seed = geo->poloidal_point(levels[i], 0.0, 0.0);
    const auto est = iota_fieldline(sys.B, Vec2(seed.x, seed.y), 200, geo->axis(), geo->orientation());
    EXPECT_NEAR(prof.iota[i], est.iota, 1e-5);
  }
}

TEST(Profile, ConstantFieldHasZeroIota) {
  IntegrableSystem sys = model(ModelKind::A);
  sys.B.eval = [](const Point&) { return Vec3(0.0, 0.0, 1.0); };
  sys.B.jacobian = {};
  sys.alpha = half_xdy();
  LevelGeometry geo(sys, origin_axis(), 1);
  const auto prof = flux_profile(geo, {0.01, 0.02, 0.03, 0.04});
  for (double i : prof.iota) EXPECT_NEAR(i, 0.0, 1e-12);
  for (double p : prof.psiP) EXPECT_NEAR(p, 0.0, 1e-14);
}

TEST(Profile, RejectsBadLevels) {
  const auto geo = make_level_geometry(model(ModelKind::A));
  EXPECT_THROW(flux_profile(*geo, {0.01, 0.02, 0.03}), Error);
  EXPECT_THROW(flux_profile(*geo, {0.01, 0.03, 0.02, 0.04}), Error);
}

TEST(Geometry, HyperbolicAxisRejected) {
  try {
    make_level_geometry(model(ModelKind::B));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HyperbolicUnsupported);
  }
}
