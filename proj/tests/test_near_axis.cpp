#include <gtest/gtest.h>

#include <cmath>

#include "ifield/near_axis.hpp"

using namespace ifield;

namespace {

IntegrableSystem model(ModelKind k, double rho_eps = 0.0) {
  ModelSpec s;
  s.kind = k;
  s.rho_eps = rho_eps;
  return make_model(s);
}

DiffeoPtr disguise() { return compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)}); }

AxisReport axis_of(const IntegrableSystem& sys, Vec2 guess) { return classify_axis(sys, find_axis(sys.B, guess)); }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvariantViolation;
}

// Disguised Model A through the whole pipeline, built once.
const NAHChart& disguised_a() {
  static const NAHChart ch = [] {
    const auto sys = pushforward(model(ModelKind::A), disguise());
    const auto nf = near_axis_normal_form(sys, axis_of(sys, Vec2(0.1, 0.0)));
    return near_axis_hamada(sys, nf);
  }();
  return ch;
}

}  // namespace

TEST(Bhat, ZeroAlphaGivesZero) {
  const auto sys = model(ModelKind::A);
  const Point q{0.1, -0.05, 0.4};
  const Vec3 beta = two_form_from_dual(sys.omega.rho(q) * sys.B(q));
  EXPECT_LT(bhat_solve(beta, sys.B(q), Vec3::Zero()).norm(), 1e-15);
}

TEST(Bhat, MinusDpRoundTrip) {
  const auto sys = model(ModelKind::A);
  for (const auto& q : sample_points(32, 0.3, 11)) {
    const Vec3 beta = two_form_from_dual(sys.omega.rho(q) * sys.B(q));
    const Vec3 alpha = -sys.p.grad(q);
    const Vec3 X = bhat_solve(beta, sys.B(q), alpha);
    EXPECT_LT((-two_form_matrix(beta) * X - alpha).norm(), 1e-13);
    EXPECT_LT(std::abs(X.dot(sys.B(q))), 1e-13);
  }
}

TEST(Bhat, RequiresAnnihilatedAlpha) {
  const Vec3 beta(1.0, 0.0, 0.0), B(0.0, 0.0, 1.0);
  EXPECT_EQ(code_of([&] { bhat_solve(beta, B, Vec3(0.0, 0.0, 1.0)); }), ErrorCode::PreconditionFailed);
}

TEST(MorseBott, ModelAIsAlreadyNormal) {
  const auto sys = model(ModelKind::A);
  const auto mb = morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0)));
  EXPECT_EQ(mb.kind, AxisKind::Elliptic);
  EXPECT_EQ(mb.eps, 1);
  EXPECT_NEAR(mb.c, 1.0, 1e-10);
  EXPECT_LT(mb.beta_axis_residual, 1e-10);
  EXPECT_LT(mb.quadratic_residual, 1e-8);
}

TEST(MorseBott, DisguisedModelA) {
  const auto sys = pushforward(model(ModelKind::A), disguise());
  const auto mb = morse_bott_normalize(sys, axis_of(sys, Vec2(0.1, 0.0)));
  EXPECT_LT(mb.beta_axis_residual, 1e-8);
  EXPECT_LT(mb.quadratic_residual, 1e-6);
  EXPECT_NEAR(mb.quadratic_radius, 0.05, 1e-15);
}

TEST(MorseBott, ModelCNeedsDoubleCover) {
  const auto sys = model(ModelKind::C);
  const auto mb = morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0)));
  EXPECT_EQ(mb.eps, -1);
  EXPECT_TRUE(mb.deck_flip);
  EXPECT_NEAR(mb.cover_period, 2.0 * kTwoPi, 1e-15);
  EXPECT_LT(mb.beta_axis_residual, 1e-8);
}

TEST(FluxCoordinates, ModelAProfiles) {
  const auto sys = model(ModelKind::A);
  const auto mb = morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0)));
  const auto fc = flux_coordinates(sys, mb);
  for (double psi : {0.001, 0.01, 0.03, 0.06}) {
    EXPECT_NEAR(fc.iota(psi), 0.3 + 0.1 * psi, 1e-8) << psi;
    EXPECT_NEAR(fc.P(psi), psi, 1e-8) << psi;
    EXPECT_NEAR(fc.psi_p(psi), 0.3 * psi + 0.05 * psi * psi, 1e-8) << psi;
  }
}

TEST(FluxCoordinates, InvariantUnderRelabelingP) {
  auto sys = model(ModelKind::A);
  const auto report = axis_of(sys, Vec2(0.0, 0.0));
  const auto fc1 = flux_coordinates(sys, morse_bott_normalize(sys, report));
  const ScalarField p = sys.p;
  sys.p.value = [p](const Point& q) {
    const double v = p(q);
    return v * v + v;
  };
  sys.p.gradient = [p](const Point& q) -> Vec3 { return (2.0 * p(q) + 1.0) * p.grad(q); };
  sys.p.hessian = nullptr;
  const auto fc2 = flux_coordinates(sys, morse_bott_normalize(sys, report));
  for (const auto& q : sample_points(24, 0.2, 5)) {
    const Point a = fc1.map->forward(q), b = fc2.map->forward(q);
    EXPECT_NEAR(a.x, b.x, 1e-8);
    EXPECT_NEAR(a.y, b.y, 1e-8);
    EXPECT_NEAR(a.phi, b.phi, 1e-8);
  }
  EXPECT_NEAR(fc1.iota(0.02), fc2.iota(0.02), 1e-8);
}

TEST(Sigma, ModelAPotentialIsAlreadyNormal) {
  const auto sys = model(ModelKind::A);
  const auto fc = flux_coordinates(sys, morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0))));
  const auto s = solve_sigma(fc, alpha_star(fc), {0.002, 0.01, 0.02});
  EXPECT_LT(s.max_period, 1e-10);
  for (const auto& q : verification_grid(0.1, 4, 8, 8)) EXPECT_LT(std::abs(s.sigma(q)), 1e-10);
}

TEST(Sigma, RecoversExactPerturbation) {
  const auto sys = model(ModelKind::A);
  auto fc = flux_coordinates(sys, morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0))));
  // alpha + d f with a zero-mean f; sigma must come back as -f
  auto f = [](const Point& q) { return 0.01 * (q.x * std::cos(q.phi) + q.x * q.y * std::sin(2.0 * q.phi)); };
  auto df = [](const Point& q) {
    const double c = std::cos(q.phi), s2 = std::sin(2.0 * q.phi);
    return Vec3(0.01 * (c + q.y * s2), 0.01 * q.x * s2,
                0.01 * (-q.x * std::sin(q.phi) + 2.0 * q.x * q.y * std::cos(2.0 * q.phi)));
  };
  const OneForm base = *fc.system.alpha;
  fc.system.alpha->eval = [base, df](const Point& q) -> Vec3 { return base(q) + df(q); };
  fc.system.alpha->jacobian = nullptr;
  const auto s = solve_sigma(fc, alpha_star(fc), {0.002, 0.01, 0.02});
  EXPECT_LT(s.max_period, 1e-10);
  EXPECT_LT(s.tangential_residual, 1e-10);
  for (double r : {std::sqrt(0.004), std::sqrt(0.02)})
    for (int k = 0; k < 8; ++k) {
      const Point q = polar_point(r, 0.7 * k, 0.9 * k);
      EXPECT_NEAR(s.sigma(q), -f(q), 1e-10);
    }
}

TEST(Sigma, NeedsPotential) {
  const auto sys = model(ModelKind::A);
  auto fc = flux_coordinates(sys, morse_bott_normalize(sys, axis_of(sys, Vec2(0.0, 0.0))));
  fc.system.alpha.reset();
  EXPECT_EQ(code_of([&] { solve_sigma(fc, alpha_star(fc), {0.01, 0.02}); }),
            ErrorCode::MissingPotentialAndFallbackDisabled);
}

TEST(Moser, ModelAIsFixed) {
  const auto sys = model(ModelKind::A);
  const auto nf = near_axis_normal_form(sys, axis_of(sys, Vec2(0.0, 0.0)));
  EXPECT_LT(nf.report.beta_residual, 1e-10);
  EXPECT_LT(nf.report.p_std, 1e-12);
  EXPECT_LT(nf.report.max_displacement, 1e-10);
}

TEST(Moser, DisguisedModelA) {
  const auto& r = disguised_a().nf.report;
  EXPECT_LT(r.beta_residual, 1e-6);
  EXPECT_LT(r.p_std, 1e-6);
  EXPECT_LT(r.psi_drift, 1e-8);
  EXPECT_LT(r.tangency, 1e-8);
  EXPECT_LT(r.trajectory_mismatch, 1e-8);
  EXPECT_LT(r.max_period, 1e-8);
  EXPECT_NEAR(r.r_verify, 0.05, 1e-15);
  EXPECT_GT(r.max_displacement, 1e-4);  // the disguise is not absorbed by the flux chart alone
}

TEST(Moser, SigmaRouteAgrees) {
  const auto sys = pushforward(model(ModelKind::A), disguise());
  NearAxisOptions opt;
  opt.route = NearAxisOptions::Route::Sigma;
  opt.n_r = 12;
  opt.n_theta = opt.n_phi = 24;
  const auto nf = near_axis_normal_form(sys, axis_of(sys, Vec2(0.1, 0.0)), opt);
  EXPECT_EQ(nf.report.route, "sigma");
  EXPECT_LT(nf.report.beta_residual, 1e-6);
  EXPECT_LT(nf.report.psi_drift, 1e-8);
}

// Error at two joint refinements of the construction grid, both above the
// round-off floor of about 1e-10.
TEST(Moser, ResidualConvergesUnderRefinement) {
  const auto sys = pushforward(model(ModelKind::A), disguise());
  const auto report = axis_of(sys, Vec2(0.1, 0.0));
  auto residual = [&](int n_r, int n) {
    NearAxisOptions opt;
    opt.n_r = n_r;
    opt.n_theta = opt.n_phi = n;
    opt.n_flux = 12;
    opt.verify_trajectories = 0;
    const auto fc = flux_coordinates(sys, morse_bott_normalize(sys, report, opt), opt);
    return moser_normalize(sys, fc, opt).report.beta_residual;
  };
  const double e1 = residual(2, 8), e2 = residual(3, 12);
  ASSERT_GT(e2, 1e-9);
  const double order = std::log(e1 / e2) / std::log(1.5);
  EXPECT_GE(order, 2.0) << e1 << " " << e2;
}

TEST(Moser, Idempotent) {
  const auto& nf = disguised_a().nf;
  // the normal-form system only exists inside the first working radius
  NearAxisOptions opt;
  opt.r_max = 0.5 * nf.report.r_work;
  opt.n_r = 8;
  opt.n_theta = opt.n_phi = 16;
  opt.n_flux = 16;
  opt.n_axis = 32;
  opt.verify_trajectories = 2;
  const auto again = near_axis_normal_form(nf.system, axis_of(nf.system, Vec2(0.0, 0.0)), opt);
  EXPECT_LT(again.report.beta_residual, 1e-6);
  EXPECT_LT(again.report.max_displacement, 1e-6);
  for (const auto& q : verification_grid(0.03, 3, 4, 4)) {
    const Point b = again.map->forward(q);
    EXPECT_LT(std::hypot(b.x - q.x, b.y - q.y), 1e-6);
  }
}

TEST(NearAxisHamada, RLambdaOracle) {
  const auto sys = model(ModelKind::A, 0.1);
  NearAxisOptions opt;
  opt.n_r = 12;
  opt.n_theta = opt.n_phi = 24;
  const auto nf = near_axis_normal_form(sys, axis_of(sys, Vec2(0.0, 0.0)), opt);
  const auto ch = near_axis_hamada(sys, nf, opt);
  const NAHState st{&ch};
  for (int s = 0; s < 16; ++s)
    for (int l = 0; l <= 4; ++l) {
      const double phi = kTwoPi * s / 16, lam = l / 4.0;
      EXPECT_NEAR(st.r_lambda(Point{0.0, 0.0, phi}, lam), (1.0 - lam) + lam / (1.0 + 0.1 * std::cos(phi)), 1e-9);
    }
  EXPECT_NEAR(ch.report.r_lambda_bound, 0.9 / 1.1, 1e-12);
  EXPECT_GE(ch.report.r_lambda_axis_min, ch.report.r_lambda_bound - 1e-12);
  EXPECT_LT(ch.report.beta_residual, 1e-6);
  EXPECT_LT(ch.report.j_residual, 1e-6);
  EXPECT_LT(ch.report.jacobian_std, 1e-6);
}

TEST(NearAxisHamada, DisguisedModelA) {
  const auto& ch = disguised_a();
  const auto& r = ch.report;
  EXPECT_LT(r.beta_residual, 1e-6);
  EXPECT_LT(r.j_residual, 1e-6);
  EXPECT_LT(r.jacobian_std, 1e-6);
  EXPECT_LT(r.commutator_B, 1e-6);
  EXPECT_LT(r.commutator_J, 1e-6);
  EXPECT_GT(r.r_lambda_min, 0.0);
  // Model A with a0 = 0 has J = d_t: K' = 0 and L' = 1 whatever the disguise
  for (double psi : {0.0005, 0.001}) {
    EXPECT_NEAR(ch.dK(psi), 0.0, 1e-6);
    EXPECT_NEAR(ch.dL(psi), 1.0, 1e-6);
  }
}

TEST(NearAxisBoozer, DisguisedModelAMhs) {
  const auto sys = pushforward(model(ModelKind::A_MHS), disguise());
  const auto ch = near_axis_boozer(sys, axis_of(sys, Vec2(0.1, 0.0)));
  EXPECT_EQ(ch.kind, ChartKind::Boozer);
  EXPECT_LT(ch.report.beta_residual, 1e-6);
  EXPECT_LT(ch.report.j_residual, 1e-6);
  EXPECT_LT(ch.boozer_residuals.max_straightness(), 1e-6);
  EXPECT_LT(ch.boozer_residuals.cov_theta_std, 1e-6);
  EXPECT_LT(ch.boozer_residuals.cov_zeta_std, 1e-6);
  EXPECT_GT(ch.boozer_residuals.jacobian_min_ratio, 0.0);
}

TEST(NearAxisBoozer, RejectsNonMhs) {
  const auto sys = model(ModelKind::A);
  EXPECT_EQ(code_of([&] { near_axis_boozer(sys, axis_of(sys, Vec2(0.0, 0.0))); }), ErrorCode::NotMHS);
}
