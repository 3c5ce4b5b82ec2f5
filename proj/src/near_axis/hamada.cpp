#include <cmath>

#include "detail.hpp"

namespace ifield {

using namespace near_axis_detail;

namespace {

struct CurrentTorus {
  double r = 0.0;
  TorusPrimitive c;  // c = j(N, .) on the torus; dg = c - (K' dt - L' dphi)
  TorusSeries Bt, Bp;
  double dK = 0.0, dL = 0.0, dP = 1.0;
};

// B^t of a chart vector; on the axis the limit iota B^phi is used.
double b_theta(const Vec3& B, const Point& q, double iota_axis) {
  double r, t;
  polar_coords(q, r, t);
  if (r < 1e-12) return iota_axis * B[2];
  return polar_frame(r, t).dt.dot(B);
}

NAHChart nah_attempt(const IntegrableSystem& sys, const NormalFormChart& nf, const NearAxisOptions& opt, double r_w) {
  const int nt = opt.n_theta, np = opt.n_phi, nr = opt.n_r;
  const auto radii = torus_radii(r_w, nr);
  const IntegrableSystem& S = nf.system;
  std::vector<CurrentTorus> tori(static_cast<std::size_t>(nr));
  std::vector<double> rl_min(nr, 1e300);
  std::vector<std::vector<std::vector<double>>> hgrid(1, std::vector<std::vector<double>>(nr));

  parallel_for(static_cast<std::size_t>(nr), opt.threads, [&](std::size_t kk) {
    const double r = radii[kk], psi = 0.5 * r * r;
    std::vector<double> ct(nt * np), cp(nt * np), bt(nt * np), bp(nt * np);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < np; ++j) {
        const double t = kTwoPi * i / nt, phi = kTwoPi * j / np;
        const Point q = polar_point(r, t, phi);
        const PolarFrame pf = polar_frame(r, t);
        const ChartSample cs = sample_chart(sys, *nf.map, q);
        const Vec3 c = cs.j(), B = cs.B;
        const int idx = i * np + j;
        ct[idx] = two_form_apply(c, pf.normal(), pf.e_t);
        cp[idx] = two_form_apply(c, pf.normal(), pf.e_phi);
        bt[idx] = pf.dt.dot(B);
        bp[idx] = B[2];
      }
    CurrentTorus& d = tori[kk];
    d.r = r;
    d.c = integrate_closed_form(ct, cp, nt, np, prune_level(ct, cp));
    d.dK = d.c.period_theta;
    d.dL = -d.c.period_phi;
    d.dP = nf.flux.dP(psi);
    d.Bt = TorusSeries::from_grid(bt, nt, np, prune_level(bt, bp));
    d.Bp = TorusSeries::from_grid(bp, nt, np, prune_level(bt, bp));
    // r_lambda is affine in lambda; its minimum over [0, 1] is min(1, r_1)
    for (int idx = 0; idx < nt * np; ++idx) {
      const double r1 = -(d.dK * bt[idx] - d.dL * bp[idx]) / d.dP;
      rl_min[kk] = std::min({rl_min[kk], 1.0, r1});
    }
    hgrid[0][kk] = d.c.f.to_grid();
    for (double& v : hgrid[0][kk]) v = -v;
  });

  NAHReport rep;
  rep.r_work = r_w;
  rep.r_lambda_min = 1e300;
  for (int k = 0; k < nr; ++k) {
    rep.r_lambda_min = std::min(rep.r_lambda_min, rl_min[k]);
    rep.closedness = std::max(rep.closedness, tori[k].c.closedness_residual);
  }
  if (!(rep.r_lambda_min > opt.r_lambda_floor))
    throw Error(ErrorCode::RLambdaNonpositive, kModule, "r_lambda is not positive on the working disk",
                "r_work=" + std::to_string(r_w) + " min r_lambda=" + std::to_string(rep.r_lambda_min));

  NAHChart ch;
  ch.nf = nf;
  std::vector<double> dK(nr), dL(nr), dV(nr), Kr(nr), Lv(nr);
  for (int k = 0; k < nr; ++k) {
    const double psi = 0.5 * radii[k] * radii[k];
    dK[k] = tori[k].dK;
    dL[k] = tori[k].dL;
    dV[k] = kTwoPi * kTwoPi * (dL[k] - nf.iota(psi) * dK[k]) / tori[k].dP;
  }
  ch.dK = EvenProfile(radii, dK);
  ch.dL = EvenProfile(radii, dL);
  ch.dV = EvenProfile(radii, dV);
  if (S.kappa) {
    // loop integrals of kappa on every torus
    const OneForm& kappa = *S.kappa;
    for (int k = 0; k < nr; ++k) {
      const double r = radii[k], psi = 0.5 * r * r;
      const auto pol = periodic_trapezoid(
          [&](double t) { return kappa(polar_point(r, t, 0.0)).dot(polar_frame(r, t).e_t); }, 32, 1e-13, 4096);
      const auto tor = periodic_trapezoid([&](double phi) { return kappa(polar_point(r, 0.0, phi))[2]; }, 32, 1e-13,
                                          4096);
      Kr[k] = pol.value / kTwoPi / psi;
      Lv[k] = -tor.value / kTwoPi;
    }
  } else {
    // integrate K' and L' from the axis, L(0) = 0
    for (int k = 0; k < nr; ++k) {
      const double psi = 0.5 * radii[k] * radii[k];
      Kr[k] = gauss_legendre([&](double s) { return ch.dK(s); }, 0.0, psi) / psi;
      Lv[k] = gauss_legendre([&](double s) { return ch.dL(s); }, 0.0, psi);
    }
  }
  ch.K_ratio = EvenProfile(radii, Kr);
  ch.L_profile = EvenProfile(radii, Lv);

  // xi = b B with b r_lambda P' = h = -g
  const TorusRate rate = [&](int k, double lam, double t, double phi, double& dt, double& dphi) {
    const CurrentTorus& d = tori[k];
    const double g = d.c.f.value(t, phi), bt = d.Bt.value(t, phi), bp = d.Bp.value(t, phi);
    const double rl = (1.0 - lam) + lam * (-(d.dK * bt - d.dL * bp) / d.dP);
    const double b = -g / (rl * d.dP);
    dt = b * bt;
    dphi = b * bp;
  };
  FlowTable ft = tabulate_flow(radii, nt, np, rate, opt);
  auto flow = std::make_shared<TorusMap>(std::move(ft.table), "nah_flow");
  flow->set_max_displacement(ft.max_displacement);
  rep.max_displacement = ft.max_displacement;
  ch.flow = flow;
  ch.h = std::make_shared<const PolarTable>(radii, nt, np, hgrid);
  ch.map = compose({nf.map, flow});
  ch.system = pushforward(sys, ch.map);

  // r_lambda on the axis and the rho bound
  {
    NAHState st{&ch};
    double rmin = 1e300, rmax = 0.0, lmin = 1e300;
    for (int s = 0; s < 64; ++s) {
      const Point q{0.0, 0.0, kTwoPi * s / 64};
      const double rho = 1.0 / S.B(q)[2];
      rmin = std::min(rmin, std::abs(rho));
      rmax = std::max(rmax, std::abs(rho));
      for (int l = 0; l <= 8; ++l) lmin = std::min(lmin, st.r_lambda(q, l / 8.0));
    }
    rep.r_lambda_axis_min = lmin;
    rep.r_lambda_bound = rmin / rmax;
  }

  // residuals of the final chart
  rep.r_verify = std::min(opt.r_verify, r_w);
  const auto grid = verification_grid(rep.r_verify);
  std::vector<double> rb(grid.size()), rj(grid.size()), jac(grid.size()), cb(grid.size()), cj(grid.size());
  parallel_for(grid.size(), opt.threads, [&](std::size_t k) {
    const Point& q = grid[k];
    const double psi = 0.5 * (q.x * q.x + q.y * q.y);
    const ChartSample cs = sample_chart(sys, *ch.map, q);
    rb[k] = (cs.beta() - beta_star(nf.iota(psi), q)).cwiseAbs().maxCoeff();
    const Vec3 js(ch.dK(psi), -ch.dL(psi) * q.x, -ch.dL(psi) * q.y);
    rj[k] = (cs.j() - js).cwiseAbs().maxCoeff();
    jac[k] = cs.rho;
    // d/dzeta of the components, 4th-order central differences
    const double hs = 1e-3;
    ChartSample sh[4];
    const double off[4] = {hs, -hs, 2 * hs, -2 * hs};
    for (int i = 0; i < 4; ++i) sh[i] = sample_chart(sys, *ch.map, Point{q.x, q.y, q.phi + off[i]});
    auto dz = [&](Vec3 ChartSample::*m) {
      return ((8.0 * (sh[0].*m - sh[1].*m) - (sh[2].*m - sh[3].*m)) / (12.0 * hs)).cwiseAbs().maxCoeff();
    };
    cb[k] = dz(&ChartSample::B);
    cj[k] = dz(&ChartSample::J);
  });
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rep.beta_residual = std::max(rep.beta_residual, rb[k]);
    rep.j_residual = std::max(rep.j_residual, rj[k]);
    rep.commutator_B = std::max(rep.commutator_B, cb[k]);
    rep.commutator_J = std::max(rep.commutator_J, cj[k]);
  }
  rep.jacobian_std = ring_std(grid, jac, 16 * 32, true);
  ch.report = rep;
  return ch;
}

}  // namespace

double NAHState::r_lambda(const Point& q, double lambda) const {
  const IntegrableSystem& S = chart->nf.system;
  const double psi = 0.5 * (q.x * q.x + q.y * q.y);
  const Vec3 B = S.B(q);
  const double bt = b_theta(B, q, chart->nf.iota(psi));
  const double r1 = -(chart->dK(psi) * bt - chart->dL(psi) * B[2]) / chart->nf.flux.dP(psi);
  return (1.0 - lambda) + lambda * r1;
}

double NAHState::b_lambda(const Point& q, double lambda) const {
  double r, t;
  polar_coords(q, r, t);
  const double h = chart->h->eval(0, r, t, q.phi).v;
  const double psi = 0.5 * r * r;
  return h / (r_lambda(q, lambda) * chart->nf.flux.dP(psi));
}

NAHChart near_axis_hamada(const IntegrableSystem& sys, const NormalFormChart& nf, const NearAxisOptions& opt) {
  if (nf.flux.mb.eps != 1)
    throw Error(ErrorCode::HyperbolicUnsupported, kModule, "near-axis Hamada charts need an elliptic axis");
  double r_w = nf.report.r_work;
  for (;;) {
    try {
      return nah_attempt(sys, nf, opt, r_w);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RLambdaNonpositive) throw;
      if (0.5 * r_w < opt.r_floor)
        throw Error(ErrorCode::RLambdaNonpositive, kModule, "r_lambda stays nonpositive at the radius floor",
                    e.context());
      r_w *= 0.5;
    }
  }
}

NAHChart near_axis_boozer(const IntegrableSystem& sys, const AxisReport& report, const NearAxisOptions& opt) {
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, kModule, "near-axis Boozer charts need a metric");
  // MHS check on a tube around the axis
  std::vector<Point> pts = sample_points(256, opt.r_verify, 20240611);
  for (Point& q : pts) {
    const Vec2 a = report.orbit.at(q.phi);
    q.x += a[0];
    q.y += a[1];
  }
  const double mhs = mhs_residual(sys, pts);
  if (mhs > opt.mhs_tol)
    throw Error(ErrorCode::NotMHS, kModule, "system is not magnetohydrostatic near the axis",
                "residual=" + std::to_string(mhs));
  const IntegrableSystem rw = reweighted_system(sys);
  const NormalFormChart nf = near_axis_normal_form(rw, report, opt);
  NAHChart ch = near_axis_hamada(rw, nf, opt);
  ch.kind = ChartKind::Boozer;
  std::vector<double> psi;
  const double psi_cap = 0.5 * ch.report.r_work * ch.report.r_work;
  for (double v : {0.01, 0.02, 0.03, 0.04})
    if (v < 0.95 * psi_cap) psi.push_back(v);
  if (!psi.empty()) {
    HamadaChart hc = restrict_chart(ch, psi);
    ch.boozer_residuals = verify_chart(sys, hc, ChartKind::Boozer);
  }
  return ch;
}

HamadaChart restrict_chart(const NAHChart& chart, const std::vector<double>& psi, int n_theta, int n_zeta) {
  HamadaChart hc;
  hc.kind = chart.kind;
  for (double s : psi) {
    const double r = std::sqrt(2.0 * s);
    std::vector<Point> grid(static_cast<std::size_t>(n_theta) * n_zeta);
    for (int i = 0; i < n_theta; ++i)
      for (int j = 0; j < n_zeta; ++j)
        grid[i * n_zeta + j] = chart.map->inverse(polar_point(r, kTwoPi * i / n_theta, kTwoPi * j / n_zeta));
    HamadaSurface hs;
    hs.chart = make_chart(chart.P(s), s, std::move(grid), n_theta, n_zeta);
    const double dP = chart.nf.flux.dP(s);
    hs.dpsi_dlevel = 1.0 / dP;
    hs.F = s;
    hs.G = chart.nf.psi_p(s);
    hs.K = chart.K(s);
    hs.L = chart.L(s);
    hs.flux_matrix << 1.0, -chart.iota(s), chart.dK(s), -chart.dL(s);
    hc.surfaces.push_back(std::move(hs));
  }
  return hc;
}

}  // namespace ifield
