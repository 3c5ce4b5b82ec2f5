#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "ifield/numerics.hpp"

using namespace ifield;

TEST(PeriodicSeries, InterpolatesTrigPolynomialExactly) {
  const int n = 16;
  std::vector<Eigen::VectorXd> s(n, Eigen::VectorXd(2));
  auto f = [](double t) { return Eigen::Vector2d(std::cos(3 * t) + 0.5, std::sin(2 * t) - 0.2 * std::cos(t)); };
  for (int i = 0; i < n; ++i) s[i] = f(kTwoPi * i / n);
  PeriodicSeries ps(s, kTwoPi);
  for (double t : {0.1, 1.3, 2.9, 5.5}) {
    EXPECT_NEAR(ps.value(t)[0], f(t)[0], 1e-13);
    EXPECT_NEAR(ps.value(t)[1], f(t)[1], 1e-13);
    EXPECT_NEAR(ps.eval(t, 1)[0], -3 * std::sin(3 * t), 1e-12);
    EXPECT_NEAR(ps.eval(t, 2)[1], -4 * std::sin(2 * t) + 0.2 * std::cos(t), 1e-11);
  }
}

TEST(PeriodicSeries, RespectsPeriod) {
  const int n = 12;
  std::vector<Eigen::VectorXd> s(n, Eigen::VectorXd(1));
  for (int i = 0; i < n; ++i) s[i][0] = std::sin(0.5 * (2 * kTwoPi * i / n));
  PeriodicSeries ps(s, 2 * kTwoPi);
  EXPECT_NEAR(ps.value(1.0)[0], std::sin(0.5), 1e-13);
}

TEST(TorusSeries, RoundTripAndDerivatives) {
  const int nt = 16, np = 12;
  auto f = [](double a, double b) { return 0.3 + std::cos(2 * a - b) + 0.1 * std::sin(a + 3 * b); };
  std::vector<double> g(nt * np);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) g[i * np + j] = f(kTwoPi * i / nt, kTwoPi * j / np);
  auto ts = TorusSeries::from_grid(g, nt, np, 1e-14);
  EXPECT_NEAR(ts.mean(), 0.3, 1e-14);
  const double a = 0.7, b = 2.1;
  auto e = ts.eval(a, b);
  EXPECT_NEAR(e[0], f(a, b), 1e-13);
  EXPECT_NEAR(e[1], -2 * std::sin(2 * a - b) + 0.1 * std::cos(a + 3 * b), 1e-12);
  EXPECT_NEAR(e[2], std::sin(2 * a - b) + 0.3 * std::cos(a + 3 * b), 1e-12);
  EXPECT_NEAR(ts.d_theta().value(a, b), e[1], 1e-12);
  EXPECT_LE(ts.modes().size(), 8u);
}

TEST(TorusSeries, IntegrateClosedForm) {
  const int nt = 16, np = 16;
  // f = sin(theta) cos(2 phi), a = df + (0.25, -0.5)
  std::vector<double> at(nt * np), ap(nt * np);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double a = kTwoPi * i / nt, b = kTwoPi * j / np;
      at[i * np + j] = std::cos(a) * std::cos(2 * b) + 0.25;
      ap[i * np + j] = -2 * std::sin(a) * std::sin(2 * b) - 0.5;
    }
  auto prim = integrate_closed_form(at, ap, nt, np);
  EXPECT_NEAR(prim.period_theta, 0.25, 1e-14);
  EXPECT_NEAR(prim.period_phi, -0.5, 1e-14);
  EXPECT_LT(prim.closedness_residual, 1e-14);
  EXPECT_NEAR(prim.f.value(0.4, 1.1), std::sin(0.4) * std::cos(2.2), 1e-13);
}

TEST(TorusSeries, ClosednessResidualDetectsNonClosedForm) {
  const int nt = 8, np = 8;
  std::vector<double> at(nt * np), ap(nt * np, 0.0);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) at[i * np + j] = std::cos(kTwoPi * i / nt + kTwoPi * j / np);
  EXPECT_GT(integrate_closed_form(at, ap, nt, np).closedness_residual, 0.1);
}

TEST(TorusGradient, MatchesAnalytic) {
  const int nt = 16, np = 8;
  std::vector<double> g(nt * np), dt, dp;
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) g[i * np + j] = std::sin(3 * kTwoPi * i / nt) * std::cos(kTwoPi * j / np);
  torus_gradient(g, nt, np, dt, dp);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double a = kTwoPi * i / nt, b = kTwoPi * j / np;
      EXPECT_NEAR(dt[i * np + j], 3 * std::cos(3 * a) * std::cos(b), 1e-12);
      EXPECT_NEAR(dp[i * np + j], -std::sin(3 * a) * std::sin(b), 1e-12);
    }
}

TEST(VectorSpline, ReproducesCubicsOnNonuniformNodes) {
  std::vector<double> x = {0.0, 0.1, 0.35, 0.4, 0.7, 0.75, 1.2};
  Eigen::MatrixXd v(x.size(), 2);
  auto f = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t * t; };
  for (std::size_t i = 0; i < x.size(); ++i) {
    v(i, 0) = f(x[i]);
    v(i, 1) = 3.0 * x[i];
  }
  VectorSpline s(x, v);
  for (double t : {0.05, 0.5, 0.9, 1.1}) {
    EXPECT_NEAR(s.eval(t)[0], f(t), 1e-12);
    EXPECT_NEAR(s.eval(t, 1)[0], -2.0 + 1.5 * t * t, 1e-11);
    EXPECT_NEAR(s.eval(t, 1)[1], 3.0, 1e-11);
  }
}

TEST(VectorSpline, MirroredParity) {
  std::vector<double> r = {0.1, 0.2, 0.3, 0.4, 0.5};
  Eigen::MatrixXd v(5, 2);
  for (int i = 0; i < 5; ++i) {
    v(i, 0) = std::cos(r[i]);
    v(i, 1) = std::sin(r[i]);
  }
  auto s = mirrored_spline(r, v, {1, -1});
  EXPECT_NEAR(s.eval(0.0)[0], 1.0, 2e-5);
  EXPECT_NEAR(s.eval(0.0)[1], 0.0, 1e-14);
  EXPECT_NEAR(s.eval(0.0, 1)[0], 0.0, 1e-14);
  EXPECT_NEAR(s.eval(-0.25)[1], -std::sin(0.25), 1e-5);
}

TEST(Quadrature, PeriodicTrapezoidSpectral) {
  auto r = periodic_trapezoid([](double t) { return std::exp(std::cos(t)); }, 4, 1e-14, 1 << 10);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, kTwoPi * std::cyl_bessel_i(0.0, 1.0), 1e-13);
  EXPECT_NEAR(gauss_legendre([](double t) { return t * t * t * t; }, 0.0, 2.0), 32.0 / 5.0, 1e-13);
}

TEST(Ode, HarmonicOscillatorWithOutputs) {
  State<2> y{1.0, 0.0};
  std::vector<double> outs = {1.0, 2.0, kTwoPi};
  std::vector<double> got;
  OdeOptions opt;
  auto st = integrate_outputs<2>([](double, const State<2>& s, State<2>& d) { d = {s[1], -s[0]}; }, y, 0.0,
                                 outs, opt, [&](double, const State<2>& s) { got.push_back(s[0]); });
  ASSERT_EQ(got.size(), 3u);
  EXPECT_NEAR(got[0], std::cos(1.0), 1e-10);
  EXPECT_NEAR(got[1], std::cos(2.0), 1e-10);
  EXPECT_NEAR(got[2], 1.0, 1e-10);
  EXPECT_GT(st.steps, 10);
}

TEST(Ode, BackwardIntegration) {
  State<1> y{std::exp(-1.0)};
  integrate_to<1>([](double, const State<1>& s, State<1>& d) { d[0] = -s[0]; }, y, 1.0, 0.0, OdeOptions{});
  EXPECT_NEAR(y[0], 1.0, 1e-11);
}

TEST(ParallelFor, VisitsEachIndexOnceAndPropagatesErrors) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 5) throw std::runtime_error("x"); }),
               std::runtime_error);
}
