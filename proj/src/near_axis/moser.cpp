#include <cmath>
#include <mutex>

#include "detail.hpp"

namespace ifield {

using namespace near_axis_detail;

namespace {

// One torus of the flux chart: a = beta(N, .) on the grid and its primitive.
struct TorusData {
  double r = 0.0;
  TorusPrimitive a;    // df = a - (period_t dt + period_phi dphi)
  TorusSeries h;       // i_xi beta_lambda = h dpsi (sigma route only; otherwise h = -f)
  bool h_from_sigma = false;
};

Vec3 beta_lambda_at(const TwoForm& beta, const FluxFunctions& f, const Point& q, double lambda) {
  const double psi = 0.5 * (q.x * q.x + q.y * q.y);
  return (1.0 - lambda) * beta(q) + lambda * beta_star(f.iota(psi), q);
}

}  // namespace

// ---------------------------------------------------------------------------

SigmaSolution solve_sigma(const FluxChart& chart, const OneForm& alpha_star, const std::vector<double>& psi_levels,
                          const NearAxisOptions& opt) {
  if (!chart.system.alpha)
    throw Error(ErrorCode::MissingPotentialAndFallbackDisabled, kModule, "sigma solve needs a vector potential");
  if (psi_levels.size() < 2) throw Error(ErrorCode::InvalidParameter, kModule, "sigma solve needs two or more tori");
  const OneForm& alpha = *chart.system.alpha;
  const int nt = opt.n_theta, np = opt.n_phi, nl = static_cast<int>(psi_levels.size());
  std::vector<double> radii(psi_levels.size());
  std::vector<std::vector<std::vector<double>>> grids(1, std::vector<std::vector<double>>(nl));
  std::vector<double> period(nl, 0.0), resid(nl, 0.0);
  parallel_for(static_cast<std::size_t>(nl), opt.threads, [&](std::size_t kk) {
    const double r = std::sqrt(2.0 * psi_levels[kk]);
    radii[kk] = r;
    auto comps = [&](double t, double phi, double& ct, double& cp) {
      const Point q = polar_point(r, t, phi);
      const PolarFrame pf = polar_frame(r, t);
      const Vec3 e = alpha_star(q) - alpha(q);
      ct = e.dot(pf.e_t);
      cp = e.dot(pf.e_phi);
    };
    std::vector<double> at(nt * np), ap(nt * np);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < np; ++j) comps(kTwoPi * i / nt, kTwoPi * j / np, at[i * np + j], ap[i * np + j]);
    const TorusPrimitive prim = integrate_closed_form(at, ap, nt, np);
    period[kk] = std::max(std::abs(prim.period_theta), std::abs(prim.period_phi));
    grids[0][kk] = prim.f.to_grid();
    // off-grid check of d sigma against the tangential components
    for (int i = 0; i < nt; i += 3)
      for (int j = 0; j < np; j += 3) {
        const double t = kTwoPi * (i + 0.5) / nt, phi = kTwoPi * (j + 0.5) / np;
        double ct, cp;
        comps(t, phi, ct, cp);
        const auto fv = prim.f.eval(t, phi);
        resid[kk] = std::max({resid[kk], std::abs(fv[1] - ct), std::abs(fv[2] - cp)});
      }
  });
  SigmaSolution out;
  for (int k = 0; k < nl; ++k) {
    out.max_period = std::max(out.max_period, period[k]);
    out.tangential_residual = std::max(out.tangential_residual, resid[k]);
  }
  if (out.max_period > opt.period_tol)
    throw Error(ErrorCode::NonvanishingPeriods, kModule, "alpha - alpha_* has nonzero periods on a flux torus",
                "max period=" + std::to_string(out.max_period));
  out.table = std::make_shared<const PolarTable>(radii, nt, np, grids);
  out.sigma = table_field(out.table);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

NormalFormChart moser_attempt(const IntegrableSystem& sys, const FluxChart& fc, const NearAxisOptions& opt,
                              const SigmaSolution* sigma, double r_w) {
  const int nt = opt.n_theta, np = opt.n_phi, nr = opt.n_r;
  const auto radii = torus_radii(r_w, nr);
  const FluxFunctions& F = *fc.f;
  std::vector<TorusData> tori(static_cast<std::size_t>(nr));
  std::vector<double> mism(nr, 0.0), rank(nr, 1e300);
  std::vector<std::vector<std::vector<double>>> hgrid(1, std::vector<std::vector<double>>(nr));
  const std::optional<OneForm>& alpha = fc.system.alpha;
  const OneForm astar = alpha_star(fc);
  if (sigma && !alpha)
    throw Error(ErrorCode::MissingPotentialAndFallbackDisabled, kModule, "sigma route needs a vector potential");

  parallel_for(static_cast<std::size_t>(nr), opt.threads, [&](std::size_t kk) {
    const double r = radii[kk], psi = 0.5 * r * r, iota = F.iota(psi);
    std::vector<double> at(nt * np), ap(nt * np), hv(nt * np);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < np; ++j) {
        const double t = kTwoPi * i / nt, phi = kTwoPi * j / np;
        const Point q = polar_point(r, t, phi);
        const PolarFrame pf = polar_frame(r, t);
        const Vec3 b = fc.beta(q);
        const int idx = i * np + j;
        at[idx] = two_form_apply(b, pf.normal(), pf.e_t);
        ap[idx] = two_form_apply(b, pf.normal(), pf.e_phi);
        if (sigma) {
          // h = (alpha - alpha_* + d sigma)(N)
          const Vec3 g = (*alpha)(q) - astar(q) + sigma->sigma.grad(q);
          hv[idx] = g.dot(pf.normal());
        }
        for (int s = 0; s <= 8; ++s) {
          const double lam = s / 8.0;
          const double a1 = lam + (1.0 - lam) * at[idx], a2 = -lam * iota + (1.0 - lam) * ap[idx];
          rank[kk] = std::min(rank[kk], a1 * a1 + r * r * a2 * a2);
        }
      }
    TorusData& d = tori[kk];
    d.r = r;
    d.a = integrate_closed_form(at, ap, nt, np, prune_level(at, ap));
    mism[kk] = std::max(std::abs(d.a.period_theta - 1.0), std::abs(d.a.period_phi + iota));
    if (sigma) {
      d.h = TorusSeries::from_grid(hv, nt, np, prune_level(hv));
      d.h_from_sigma = true;
      hgrid[0][kk] = hv;
    } else {
      hgrid[0][kk] = d.a.f.to_grid();
      for (double& v : hgrid[0][kk]) v = -v;
    }
  });

  NormalFormReport rep;
  rep.r_work = r_w;
  rep.n_r = nr;
  rep.n_theta = nt;
  rep.n_phi = np;
  rep.route = sigma ? "sigma" : "two_form";
  rep.min_rank = 1e300;
  for (int k = 0; k < nr; ++k) {
    rep.max_period = std::max(rep.max_period, mism[k]);
    rep.min_rank = std::min(rep.min_rank, rank[k]);
    rep.closedness = std::max(rep.closedness, tori[k].a.closedness_residual);
  }
  if (rep.min_rank < opt.rank_floor)
    throw Error(ErrorCode::RankLoss, kModule, "interpolated flux form loses rank on the working disk",
                "r_work=" + std::to_string(r_w) + " min rank=" + std::to_string(rep.min_rank));
  if (rep.max_period > opt.period_tol)
    throw Error(ErrorCode::NonvanishingPeriods, kModule, "flux form periods disagree with the flux functions",
                "mismatch=" + std::to_string(rep.max_period));

  // xi on the torus: a_lambda(xi) = -h, minimal in r^2 dt^2 + dphi^2
  const TorusRate rate = [&](int k, double lam, double t, double phi, double& dt, double& dphi) {
    const TorusData& d = tori[k];
    const double r = d.r, iota = F.iota(0.5 * r * r);
    const auto fv = d.a.f.eval(t, phi);
    const double h = d.h_from_sigma ? d.h.value(t, phi) : -fv[0];
    const double a1 = lam + (1.0 - lam) * (d.a.period_theta + fv[1]);
    const double a2 = -lam * iota + (1.0 - lam) * (d.a.period_phi + fv[2]);
    const double D = a1 * a1 + r * r * a2 * a2;
    dt = -h * a1 / D;
    dphi = -h * r * r * a2 / D;
  };
  FlowTable ft = tabulate_flow(radii, nt, np, rate, opt);
  auto moser = std::make_shared<TorusMap>(std::move(ft.table), "moser");
  moser->set_max_displacement(ft.max_displacement);
  rep.max_displacement = ft.max_displacement;

  NormalFormChart nf;
  nf.flux = fc;
  nf.moser = moser;
  nf.h = std::make_shared<const PolarTable>(radii, nt, np, hgrid);
  nf.map = compose({fc.map, moser});
  nf.system = pushforward(sys, nf.map);
  if (sigma) nf.sigma = std::make_shared<SigmaSolution>(*sigma);

  // normal-form residual on the verification grid
  rep.r_verify = std::min(opt.r_verify, r_w);
  const auto grid = verification_grid(rep.r_verify);
  const TwoForm pb = pull_back(fc.beta, moser);
  std::vector<double> res(grid.size());
  parallel_for(grid.size(), opt.threads, [&](std::size_t k) {
    const Point& q = grid[k];
    const double psi = 0.5 * (q.x * q.x + q.y * q.y);
    res[k] = (pb(q) - beta_star(F.iota(psi), q)).cwiseAbs().maxCoeff();
  });
  for (double v : res) rep.beta_residual = std::max(rep.beta_residual, v);

  // p at 12 flux levels
  const auto rings = verification_grid(rep.r_verify, 12, 16, 32);
  std::vector<double> pv(rings.size());
  parallel_for(rings.size(), opt.threads, [&](std::size_t k) { pv[k] = nf.system.p(rings[k]); });
  rep.p_std = ring_std(rings, pv, 16 * 32, false);

  // 3-D trajectories of xi from the b-hat solve
  const ScalarField hf = table_field(nf.h);
  std::mutex mu;
  const int ntraj = std::max(0, opt.verify_trajectories);
  parallel_for(static_cast<std::size_t>(ntraj), opt.threads, [&](std::size_t kk) {
    const double s = ntraj > 1 ? static_cast<double>(kk) / (ntraj - 1) : 0.5;
    const Point start = polar_point(rep.r_verify * (0.3 + 0.7 * s), kTwoPi * std::fmod(0.618034 * kk, 1.0),
                                    kTwoPi * std::fmod(0.377 * kk + 0.1, 1.0));
    const double psi0 = 0.5 * (start.x * start.x + start.y * start.y);
    double drift = 0.0, tang = 0.0;
    State<3> y{start.x, start.y, start.phi};
    OdeOptions ode;
    ode.abs_tol = ode.rel_tol = opt.ode_tol;
    ode.h_init = -1.0 / 16.0;
    std::vector<double> outs;
    for (int i = 15; i >= 0; --i) outs.push_back(i / 16.0);
    integrate_outputs<3>(
        [&](double lam, const State<3>& x, State<3>& dx) {
          const Point q{x[0], x[1], x[2]};
          if (std::hypot(q.x, q.y) > r_w * (1.0 + 1e-6))
            throw Error(ErrorCode::FlowEscape, kModule, "Moser trajectory left the working disk",
                        "lambda=" + std::to_string(lam));
          const Vec3 bl = beta_lambda_at(fc.beta, F, q, lam);
          const Vec3 dpsi(q.x, q.y, 0.0);
          const Vec3 X = bhat_solve(bl, two_form_dual(bl), hf(q) * dpsi);
          tang = std::max(tang, std::abs(dpsi.dot(X)));
          dx = {X[0], X[1], X[2]};
        },
        y, 1.0, outs, ode,
        [&](double, const State<3>& x) { drift = std::max(drift, std::abs(0.5 * (x[0] * x[0] + x[1] * x[1]) - psi0)); });
    const Point old = moser->inverse(start);
    double dphi = y[2] - old.phi;
    const double mis = std::max({std::abs(y[0] - old.x), std::abs(y[1] - old.y), std::abs(dphi)});
    std::lock_guard<std::mutex> lock(mu);
    rep.psi_drift = std::max(rep.psi_drift, drift);
    rep.tangency = std::max(rep.tangency, tang);
    rep.trajectory_mismatch = std::max(rep.trajectory_mismatch, mis);
  });
  nf.report = rep;
  return nf;
}

}  // namespace

NormalFormChart moser_normalize(const IntegrableSystem& sys, const FluxChart& chart, const NearAxisOptions& opt,
                                const SigmaSolution* sigma) {
  double r_w = std::min(0.8 * opt.r_max, chart.r_max);
  std::vector<double> tried;
  for (;;) {
    tried.push_back(r_w);
    try {
      NormalFormChart nf = moser_attempt(sys, chart, opt, sigma, r_w);
      nf.report.tried_radii = tried;
      return nf;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RankLoss || 0.5 * r_w < opt.r_floor) throw;
      r_w *= 0.5;
    }
  }
}

MoserState moser_state(const NormalFormChart& nf, double lambda) {
  MoserState s;
  s.lambda = lambda;
  s.h = table_field(nf.h);
  if (nf.sigma) s.sigma = nf.sigma->sigma;
  const TwoForm beta = nf.flux.beta;
  const auto f = nf.flux.f;
  s.beta_lambda.eval = [beta, f, lambda](const Point& q) { return beta_lambda_at(beta, *f, q, lambda); };
  const ScalarField h = s.h;
  s.xi.eval = [beta, f, h, lambda](const Point& q) -> Vec3 {
    const Vec3 bl = beta_lambda_at(beta, *f, q, lambda);
    return bhat_solve(bl, two_form_dual(bl), h(q) * Vec3(q.x, q.y, 0.0));
  };
  return s;
}

NormalFormChart near_axis_normal_form(const IntegrableSystem& sys, const AxisReport& report,
                                      const NearAxisOptions& opt) {
  const MBChart mb = morse_bott_normalize(sys, report, opt);
  const FluxChart fc = flux_coordinates(sys, mb, opt);
  if (opt.route == NearAxisOptions::Route::Sigma) {
    std::vector<double> psi;
    for (double r : torus_radii(std::min(0.8 * opt.r_max, fc.r_max), opt.n_r)) psi.push_back(0.5 * r * r);
    const SigmaSolution sigma = solve_sigma(fc, alpha_star(fc), psi, opt);
    return moser_normalize(sys, fc, opt, &sigma);
  }
  return moser_normalize(sys, fc, opt);
}

}  // namespace ifield
