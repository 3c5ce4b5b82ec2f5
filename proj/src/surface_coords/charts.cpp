#include <cmath>
#include <mutex>

#include "ifield/surface_coords.hpp"

namespace ifield {

namespace {

constexpr const char* kModule = "surface_coords";

struct Stat {
  std::vector<double> v;
  void add(double x) { v.push_back(x); }
  double mean() const {
    double m = 0.0;
    for (double x : v) m += x;
    return m / v.size();
  }
  double std() const {
    const double m = mean();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
  }
};

double rel(const Stat& s, double scale) { return s.std() / (scale > 0.0 ? scale : 1.0); }

Vec3 level_normal_of(const Vec3& gp) { return gp / gp.squaredNorm(); }

// (1/2pi) loop integrals of the two-form b(N, .) over the polar poloidal loop
// and the toroidal loop of the level geometry, N the level normal.
Vec2 form_level_derivatives(const LevelGeometry& geo, const TwoForm& b, double level) {
  auto fP = [&](double t) {
    const Point q = geo.poloidal_point(level, 0.0, t);
    return two_form_apply(b(q), geo.level_normal(q, t), geo.poloidal_tangent(level, 0.0, t));
  };
  const Loop tl = geo.toroidal_loop(level, 0.0);
  auto fT = [&](double phi) {
    const Point q = tl.point(phi);
    return two_form_apply(b(q), geo.level_normal(q, 0.0), tl.tangent(phi));
  };
  return {periodic_trapezoid(fP, 16, 1e-12, 1 << 12, 1e-16).value / kTwoPi,
          periodic_trapezoid(fT, 16, 1e-12, 1 << 12, 1e-16).value / kTwoPi};
}

Loop chart_loop(const SurfaceChart& c, bool theta_loop) {
  Loop l;
  l.homology = theta_loop ? Loop::Homology::Poloidal : Loop::Homology::Toroidal;
  l.point = [&c, theta_loop](double s) { return theta_loop ? c.at(s, 0.0) : c.at(0.0, s); };
  l.tangent = [&c, theta_loop](double s) {
    Vec3 xt, xz;
    theta_loop ? c.tangents(s, 0.0, xt, xz) : c.tangents(0.0, s, xt, xz);
    return theta_loop ? xt : xz;
  };
  return l;
}

}  // namespace

const char* to_string(ChartKind k) { return k == ChartKind::Hamada ? "hamada" : "boozer"; }

double ChartResiduals::max_straightness() const {
  return std::max({b_theta_std, b_zeta_std, j_theta_std, j_zeta_std, jacobian_std, cov_theta_std, cov_zeta_std});
}

void ChartResiduals::merge(const ChartResiduals& o) {
  b_psi = std::max(b_psi, o.b_psi);
  b_theta_std = std::max(b_theta_std, o.b_theta_std);
  b_zeta_std = std::max(b_zeta_std, o.b_zeta_std);
  j_theta_std = std::max(j_theta_std, o.j_theta_std);
  j_zeta_std = std::max(j_zeta_std, o.j_zeta_std);
  jacobian_std = std::max(jacobian_std, o.jacobian_std);
  cov_theta_std = std::max(cov_theta_std, o.cov_theta_std);
  cov_zeta_std = std::max(cov_zeta_std, o.cov_zeta_std);
  jacobian_min_ratio = (jacobian_min_ratio == 0.0) ? o.jacobian_min_ratio
                                                    : std::min(jacobian_min_ratio, o.jacobian_min_ratio);
}

IntegrableSystem reweighted_system(const IntegrableSystem& sys) {
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, kModule, "the Boozer construction needs a metric");
  IntegrableSystem r;
  r.label = sys.label + "/reweighted";
  const VectorField B = sys.B;
  const Metric g = *sys.metric;
  const ScalarField p = sys.p;
  const ScalarField rho = sys.omega.rho;
  r.B.eval = [B, g](const Point& q) -> Vec3 {
    const Vec3 b = B(q);
    return b / b.dot(g(q) * b);
  };
  r.J.eval = [B, g, p, rho](const Point& q) -> Vec3 {
    const Vec3 b = B(q);
    const Mat3 gq = g(q);
    const Vec3 bflat = gq * b;
    const Vec3 dp = p.grad(q);
    // i_V Omega = B-flat ^ dp
    const Mat3 W = bflat * dp.transpose() - dp * bflat.transpose();
    return two_form_dual(two_form_from_matrix(W)) / (rho(q) * b.dot(bflat));
  };
  r.p = sys.p;
  r.omega.floor = sys.omega.floor;
  r.omega.rho.value = [B, g, rho](const Point& q) {
    const Vec3 b = B(q);
    return rho(q) * b.dot(g(q) * b);
  };
  r.alpha = sys.alpha;
  r.metric = sys.metric;
  return r;
}

ChartResiduals verify_surface(const IntegrableSystem& sys, const SurfaceChart& chart, ChartKind kind,
                              double dpsi_dlevel) {
  const IntegrableSystem rw = kind == ChartKind::Boozer ? reweighted_system(sys) : IntegrableSystem{};
  const IntegrableSystem& S = kind == ChartKind::Boozer ? rw : sys;
  Stat bt, bz, jt, jz, jac, ct, cz;
  double b_psi = 0.0, jmin = std::numeric_limits<double>::infinity(), jmax = -jmin;
  std::vector<Vec3> XT, XZ;
  chart.grid_tangents(XT, XZ);
  for (std::size_t k = 0; k < chart.grid.size(); ++k) {
    const Point& q = chart.grid[k];
    const Vec3& xt = XT[k];
    const Vec3& xz = XZ[k];
    const Vec3 gp = S.p.grad(q);
    const Vec3 N = level_normal_of(gp) / dpsi_dlevel;
    Mat3 F;
    F << N, xt, xz;
    const auto lu = F.partialPivLu();
    const Vec3 B = S.B(q), J = S.J(q);
    const Vec3 cb = lu.solve(B), cj = lu.solve(J);
    b_psi = std::max(b_psi, std::abs(dpsi_dlevel * gp.dot(B)));
    bt.add(cb[1]);
    bz.add(cb[2]);
    jt.add(cj[1]);
    jz.add(cj[2]);
    const double jv = S.omega.rho(q) * F.determinant();
    jac.add(jv);
    jmin = std::min(jmin, jv);
    jmax = std::max(jmax, jv);
    if (kind == ChartKind::Boozer) {
      const Vec3 bflat = (*sys.metric)(q) * sys.B(q);
      ct.add(xt.dot(bflat));
      cz.add(xz.dot(bflat));
    }
  }
  ChartResiduals r;
  r.b_psi = b_psi;
  const double bs = std::hypot(bt.mean(), bz.mean()), js = std::hypot(jt.mean(), jz.mean());
  r.b_theta_std = rel(bt, bs);
  r.b_zeta_std = rel(bz, bs);
  r.j_theta_std = rel(jt, js);
  r.j_zeta_std = rel(jz, js);
  r.jacobian_std = rel(jac, std::abs(jac.mean()));
  r.jacobian_min_ratio = (jmin * jmax > 0.0) ? std::min(std::abs(jmin), std::abs(jmax)) /
                                                   std::max(std::abs(jmin), std::abs(jmax))
                                             : 0.0;
  if (kind == ChartKind::Boozer) {
    const double cs = std::hypot(ct.mean(), cz.mean());
    r.cov_theta_std = rel(ct, cs);
    r.cov_zeta_std = rel(cz, cs);
  }
  return r;
}

Mat2 chart_flux_matrix(const IntegrableSystem& sys, const SurfaceChart& chart, double dpsi_dlevel) {
  const TwoForm beta = flux_form(sys.B, sys.omega);
  const TwoForm j = flux_form(sys.J, sys.omega);
  Mat2 m = Mat2::Zero();
  const double n = static_cast<double>(chart.grid.size());
  std::vector<Vec3> XT, XZ;
  chart.grid_tangents(XT, XZ);
  for (std::size_t k = 0; k < chart.grid.size(); ++k) {
    const Point& q = chart.grid[k];
    const Vec3& xt = XT[k];
    const Vec3& xz = XZ[k];
    const Vec3 N = level_normal_of(sys.p.grad(q)) / dpsi_dlevel;
    const Vec3 b = beta(q), c = j(q);
    m(0, 0) += two_form_apply(b, N, xt);
    m(0, 1) += two_form_apply(b, N, xz);
    m(1, 0) += two_form_apply(c, N, xt);
    m(1, 1) += two_form_apply(c, N, xz);
  }
  return m / n;
}

namespace {

HamadaSurface hamada_surface(const LevelGeometry& geo, double level, const HamadaOptions& opt, int nt, int nz,
                             ChartKind kind, const IntegrableSystem& original) {
  const IntegrableSystem& sys = geo.system();
  SurfaceOptions so = opt.surface;
  so.n_theta = nt;
  so.n_zeta = nz;
  const SurfaceChart base = build_surface(geo, level, so);
  const std::size_t n = base.grid.size();
  std::vector<double> bt(n), bp(n), jt(n), jp(n);
  std::vector<Vec3> XT, XP;
  base.grid_tangents(XT, XP);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Point& q = base.grid[idx];
    const Vec3& xt = XT[idx];
    const Vec3& xp = XP[idx];
    Mat3 F;
    F << xt, xp, level_normal_of(sys.p.grad(q));
    const auto lu = F.partialPivLu();
    const Vec3 cb = lu.solve(sys.B(q)), cj = lu.solve(sys.J(q));
    Mat2 M;
    M << cb[0], cj[0], cb[1], cj[1];
    if (std::abs(M.determinant()) < 1e-14)
      throw Error(ErrorCode::RankLoss, kModule, "B and J are dependent on the surface",
                  "level=" + std::to_string(level));
    const Mat2 C = M.inverse();
    bt[idx] = C(0, 0);
    bp[idx] = C(0, 1);
    jt[idx] = C(1, 0);
    jp[idx] = C(1, 1);
  }
  const TorusPrimitive PB = integrate_closed_form(bt, bp, nt, nz);
  const TorusPrimitive PJ = integrate_closed_form(jt, jp, nt, nz);
  HamadaSurface hs;
  hs.periods << kTwoPi * PB.period_theta, kTwoPi * PB.period_phi, kTwoPi * PJ.period_theta,
      kTwoPi * PJ.period_phi;
  hs.closedness = std::max(PB.closedness_residual, PJ.closedness_residual);
  const Mat2 Q = kTwoPi * hs.periods.inverse();
  const std::vector<double> fb = PB.f.to_grid(), fj = PJ.f.to_grid();
  std::vector<double> dth(n), dze(n);
  for (std::size_t k = 0; k < n; ++k) {
    dth[k] = Q(0, 0) * fb[k] + Q(0, 1) * fj[k];
    dze[k] = Q(1, 0) * fb[k] + Q(1, 1) * fj[k];
  }
  hs.d_theta = TorusSeries::from_grid(dth, nt, nz);
  hs.d_zeta = TorusSeries::from_grid(dze, nt, nz);
  std::vector<Point> grid(n);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < nz; ++k) {
      const double th = kTwoPi * i / nt, ze = kTwoPi * k / nz;
      double t = th, ph = ze;
      for (int it = 0; it < 50; ++it) {
        const auto a = hs.d_theta.eval(t, ph);
        const auto b = hs.d_zeta.eval(t, ph);
        const Vec2 r(t + a[0] - th, ph + b[0] - ze);
        Mat2 D;
        D << 1.0 + a[1], a[2], b[1], 1.0 + b[2];
        const Vec2 step = D.partialPivLu().solve(r);
        t -= step[0];
        ph -= step[1];
        if (step.cwiseAbs().maxCoeff() < 1e-15) break;
        if (it == 49 && step.cwiseAbs().maxCoeff() > 1e-11)
          throw Error(ErrorCode::NewtonDivergence, kModule, "straight-angle inversion did not converge");
      }
      grid[static_cast<std::size_t>(i) * nz + k] = base.at(t, ph);
    }
  hs.chart = make_chart(level, base.psi, std::move(grid), nt, nz, base.winding);
  for (const auto& q : hs.chart.grid) hs.chart.p_variation = std::max(hs.chart.p_variation, std::abs(sys.p(q) - level));

  const FluxDerivatives fd = flux_level_derivatives(geo, level);
  hs.dpsi_dlevel = fd.dpsiT;
  hs.F = hs.chart.psi;
  hs.G = poloidal_flux(geo, level, opt.flux);
  if (sys.kappa) {
    hs.K = loop_integral(*sys.kappa, chart_loop(hs.chart, true)).value;
    hs.L = -loop_integral(*sys.kappa, chart_loop(hs.chart, false)).value;
  } else if (opt.allow_current_fallback) {
    // K, L relative to their axis values
    const TwoForm j = flux_form(sys.J, sys.omega);
    const Vec2 kl(gauss_legendre([&](double l) { return form_level_derivatives(geo, j, l)[0]; }, geo.p_axis(), level),
                  gauss_legendre([&](double l) { return form_level_derivatives(geo, j, l)[1]; }, geo.p_axis(), level));
    hs.K = kl[0];
    hs.L = -kl[1];
  } else {
    throw Error(ErrorCode::MissingCurrentPotential, kModule, "current potential absent and fallback disabled");
  }
  hs.flux_matrix = chart_flux_matrix(sys, hs.chart, hs.dpsi_dlevel);
  hs.residuals = verify_surface(kind == ChartKind::Boozer ? original : sys, hs.chart, kind, hs.dpsi_dlevel);
  return hs;
}

HamadaChart build_chart(const LevelGeometry& geo, const std::vector<double>& levels, const HamadaOptions& opt,
                        ChartKind kind, const IntegrableSystem& original) {
  if (levels.empty()) throw Error(ErrorCode::InvalidParameter, kModule, "no levels requested");
  HamadaChart chart;
  chart.kind = kind;
  chart.surfaces.resize(levels.size());
  parallel_for(levels.size(), opt.threads, [&](std::size_t s) {
    int nt = opt.surface.n_theta, nz = opt.surface.n_zeta;
    HamadaSurface hs = hamada_surface(geo, levels[s], opt, nt, nz, kind, original);
    while (hs.residuals.max_straightness() > opt.refine_tol && 2 * std::max(nt, nz) <= opt.max_resolution) {
      nt *= 2;
      nz *= 2;
      hs = hamada_surface(geo, levels[s], opt, nt, nz, kind, original);
    }
    chart.surfaces[s] = std::move(hs);
  });
  for (const auto& s : chart.surfaces) chart.residuals.merge(s.residuals);
  return chart;
}

}  // namespace

HamadaChart to_hamada(const LevelGeometry& geo, const std::vector<double>& levels, const HamadaOptions& opt) {
  return build_chart(geo, levels, opt, ChartKind::Hamada, geo.system());
}

HamadaChart to_hamada(const IntegrableSystem& sys, const std::vector<double>& levels, const HamadaOptions& opt) {
  return to_hamada(*make_level_geometry(sys), levels, opt);
}

HamadaChart to_boozer(const IntegrableSystem& sys, const std::vector<double>& levels, const HamadaOptions& opt) {
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, kModule, "the Boozer construction needs a metric");
  return to_boozer(*make_level_geometry(sys), levels, opt);
}

HamadaChart to_boozer(const LevelGeometry& geo_ref, const std::vector<double>& levels, const HamadaOptions& opt) {
  const IntegrableSystem& sys = geo_ref.system();
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, kModule, "the Boozer construction needs a metric");
  const LevelGeometry* geo = &geo_ref;
  // MHS is tested on the requested surfaces themselves.
  std::vector<Point> pts;
  for (double lv : levels)
    for (int k = 0; k < 8; ++k) pts.push_back(geo->poloidal_point(lv, kTwoPi * k / 8.0, kTwoPi * ((3 * k) % 8) / 8.0));
  const double mhs = mhs_residual(sys, pts);
  if (!(mhs <= opt.mhs_tol))
    throw Error(ErrorCode::NotMHS, kModule, "system is not magnetohydrostatic; Boozer coordinates refused",
                "mhs_residual=" + std::to_string(mhs));
  const IntegrableSystem rw = reweighted_system(sys);
  LevelGeometry rgeo(rw, geo->axis(), geo->orientation());
  return build_chart(rgeo, levels, opt, ChartKind::Boozer, sys);
}

ChartResiduals verify_chart(const IntegrableSystem& sys, HamadaChart& chart, ChartKind kind) {
  chart.residuals = ChartResiduals{};
  for (auto& s : chart.surfaces) {
    s.residuals = verify_surface(sys, s.chart, kind, s.dpsi_dlevel);
    chart.residuals.merge(s.residuals);
  }
  return chart.residuals;
}

HamadaChart sl2z_transform(const IntegrableSystem& sys, const HamadaChart& chart, const Mat2i& A,
                           const std::function<Vec2(double psi)>& nu) {
  if (A.determinant() != 1)
    throw Error(ErrorCode::NotUnimodular, kModule, "angle transformation must have determinant 1",
                "det=" + std::to_string(A.determinant()));
  const Mat2 Ad = A.cast<double>();
  const Mat2 Ainv = Ad.inverse();
  const Mat2i Ainv_i = Ainv.array().round().cast<int>().matrix();
  HamadaChart out;
  out.kind = chart.kind;
  const IntegrableSystem rw = chart.kind == ChartKind::Boozer ? reweighted_system(sys) : IntegrableSystem{};
  const IntegrableSystem& S = chart.kind == ChartKind::Boozer ? rw : sys;
  for (const auto& s : chart.surfaces) {
    HamadaSurface h = s;
    const Vec2 v = nu ? nu(s.chart.psi) : Vec2::Zero();
    const SurfaceChart& c = s.chart;
    std::vector<Point> grid(c.grid.size());
    for (int i = 0; i < c.n_theta; ++i)
      for (int k = 0; k < c.n_zeta; ++k) {
        const Vec2 old = Ainv * (Vec2(c.theta(i), c.zeta(k)) - v);
        grid[static_cast<std::size_t>(i) * c.n_zeta + k] = c.at(old[0], old[1]);
      }
    const Eigen::RowVector2i w = Eigen::RowVector2i(c.winding[0], c.winding[1]) * Ainv_i;
    h.chart = make_chart(c.level, c.psi, std::move(grid), c.n_theta, c.n_zeta, {w[0], w[1]});
    h.chart.p_variation = c.p_variation;
    h.A = A * s.A;
    h.nu = Ad * s.nu + v;
    const Eigen::RowVector2d fg = Eigen::RowVector2d(s.F, -s.G) * Ainv;
    const Eigen::RowVector2d kl = Eigen::RowVector2d(s.K, -s.L) * Ainv;
    h.F = fg[0];
    h.G = -fg[1];
    h.K = kl[0];
    h.L = -kl[1];
    h.flux_matrix = chart_flux_matrix(S, h.chart, s.dpsi_dlevel);
    h.residuals = verify_surface(sys, h.chart, chart.kind, s.dpsi_dlevel);
    out.residuals.merge(h.residuals);
    out.surfaces.push_back(std::move(h));
  }
  return out;
}

Vec2 chart_angles(const SurfaceChart& chart, const Point& q) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < chart.grid.size(); ++k) {
    const Point& g = chart.grid[k];
    const double dphi = std::remainder(g.phi - q.phi, kTwoPi);
    const double d = std::hypot(g.x - q.x, g.y - q.y, dphi);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  Vec2 a(chart.theta(static_cast<int>(best) / chart.n_zeta), chart.zeta(static_cast<int>(best) % chart.n_zeta));
  for (int it = 0; it < 60; ++it) {
    const Point p = chart.at(a[0], a[1]);
    Vec3 xt, xz;
    chart.tangents(a[0], a[1], xt, xz);
    const Vec3 r(p.x - q.x, p.y - q.y, std::remainder(p.phi - q.phi, kTwoPi));
    Eigen::Matrix<double, 3, 2> D;
    D << xt, xz;
    const Vec2 step = D.colPivHouseholderQr().solve(r);
    a -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-14) break;
  }
  return a;
}

Sl2zComparison extract_sl2z(const SurfaceChart& c1, const SurfaceChart& c2) {
  // angles1 along the theta and zeta cycles of chart 2
  auto cycle_increment = [&](bool theta_cycle) {
    const int n = theta_cycle ? c2.n_theta : c2.n_zeta;
    Vec2 prev = chart_angles(c1, c2.at(0.0, 0.0));
    Vec2 total = Vec2::Zero();
    for (int k = 1; k <= n; ++k) {
      const double s = kTwoPi * k / n;
      const Vec2 cur = chart_angles(c1, theta_cycle ? c2.at(s, 0.0) : c2.at(0.0, s));
      const Vec2 d(std::remainder(cur[0] - prev[0], kTwoPi), std::remainder(cur[1] - prev[1], kTwoPi));
      total += d;
      prev = cur;
    }
    return Vec2(total / kTwoPi);
  };
  Mat2 M;
  M.col(0) = cycle_increment(true);
  M.col(1) = cycle_increment(false);
  const Mat2 Mr = M.array().round().matrix();
  Sl2zComparison out;
  out.integrality = (M - Mr).cwiseAbs().maxCoeff();
  // angles1 = M angles2 + const  =>  angles2 = M^-1 angles1 + nu
  const Mat2 Ad = Mr.inverse();
  out.A = Ad.array().round().cast<int>().matrix();
  Stat s0, s1;
  Vec2 ref = Vec2::Zero();
  bool first = true;
  for (int i = 0; i < c2.n_theta; ++i)
    for (int k = 0; k < c2.n_zeta; ++k) {
      const Vec2 a2(c2.theta(i), c2.zeta(k));
      const Vec2 a1 = chart_angles(c1, c2.grid[static_cast<std::size_t>(i) * c2.n_zeta + k]);
      Vec2 d = a2 - out.A.cast<double>() * a1;
      if (first) {
        ref = d;
        first = false;
      }
      d = Vec2(unwrap_near(d[0], ref[0]), unwrap_near(d[1], ref[1]));
      s0.add(d[0]);
      s1.add(d[1]);
    }
  out.nu = Vec2(std::remainder(s0.mean(), kTwoPi), std::remainder(s1.mean(), kTwoPi));
  out.nu_std = std::max(s0.std(), s1.std());
  return out;
}

}  // namespace ifield
