#include <chrono>
#include <cmath>
#include <complex>

#include "ifield/cli.hpp"
#include "ifield/embedding.hpp"
#include "ifield/near_axis.hpp"

namespace ifield::cli {

namespace {

using Params = Json;

double num(const Params& p, const char* k) { return p.at(k).get<double>(); }
int count(const Params& p, const char* k) { return p.at(k).get<int>(); }

std::vector<double> numbers(const Json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

Json point_json(const Point& q) { return Json::array({q.x, q.y, q.phi}); }

// The configured guess, or the image of the model axis under the disguise.
Vec2 axis_guess(const RunConfig& cfg) {
  const Json& g = cfg.params.at("guess");
  if (!g.empty()) return Vec2(g[0].get<double>(), g[1].get<double>());
  const Point q = build_disguise(cfg)->forward(Point{0.0, 0.0, 0.0});
  return Vec2(q.x, q.y);
}

TraceOptions trace_options(const Params& p) {
  TraceOptions t;
  t.tol = num(p, "tol");
  return t;
}

void add(RunReport& r, const std::string& name, double value, double tol = 0.0) {
  r.residuals.push_back({name, value, tol});
}

Json axis_meta(const AxisReport& rep) {
  Json m;
  m["kind"] = to_string(rep.kind);
  m["trace"] = rep.monodromy.trace();
  m["det"] = rep.monodromy.det();
  Eigen::EigenSolver<Mat2> es(rep.monodromy.m);
  Json mult = Json::array();
  for (int i = 0; i < 2; ++i) mult.push_back(Json::array({es.eigenvalues()[i].real(), es.eigenvalues()[i].imag()}));
  m["multipliers"] = mult;
  m["monodromy"] = Json::array({Json::array({rep.monodromy.m(0, 0), rep.monodromy.m(0, 1)}),
                                Json::array({rep.monodromy.m(1, 0), rep.monodromy.m(1, 1)})});
  m["hessian_c"] = rep.hessian_c;
  m["hessian_signature"] = Json::array({rep.hessian_pos, rep.hessian_neg});
  m["orientation"] = rep.orientation;
  m["p_axis"] = rep.p_axis;
  m["axis_residual"] = rep.orbit.residual;
  return m;
}

void run_verify(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const Params& p = cfg.params;
  const auto pts = sample_points(static_cast<std::size_t>(count(p, "samples")), num(p, "radius"), cfg.seed);
  const ResidualReport rep = integrability_residuals(sys, pts);
  add(r, "commutator", rep.max_commutator, num(p, "tol"));
  add(r, "ijbeta_dp", rep.max_ijbeta_dp, num(p, "tol"));
  if (rep.has_mhs) add(r, "mhs", rep.max_mhs);
  r.meta["n_samples"] = rep.n_samples;
  r.meta["argmax_commutator"] = point_json(rep.argmax_commutator);
  r.meta["argmax_ijbeta_dp"] = point_json(rep.argmax_ijbeta_dp);
}

void run_find_axis(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const Params& p = cfg.params;
  AxisOptions opt;
  opt.tol = num(p, "tol");
  opt.n_samples = count(p, "n_samples");
  const ClosedOrbit orbit = find_axis(sys.B, axis_guess(cfg), opt);
  add(r, "axis_residual", orbit.residual, num(p, "tol"));
  Table axis{"axis", {"phi", "x", "y"}, {}};
  const int n = static_cast<int>(orbit.samples.size());
  for (int k = 0; k < n; ++k)
    axis.rows.push_back({orbit.period * k / n, orbit.samples[k][0], orbit.samples[k][1]});
  Table newton{"newton", {"iteration", "residual"}, {}};
  for (std::size_t i = 0; i < orbit.newton_residuals.size(); ++i)
    newton.rows.push_back({static_cast<double>(i), orbit.newton_residuals[i]});
  r.tables = {axis, newton};
  r.meta["period"] = orbit.period;
}

void run_classify(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const AxisReport rep = classify_axis(sys, find_axis(sys.B, axis_guess(cfg)));
  add(r, "det_minus_one", std::abs(rep.monodromy.det() - 1.0), num(cfg.params, "tol"));
  add(r, "axis_residual", rep.orbit.residual);
  r.meta = axis_meta(rep);
}

void run_trace(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const Params& p = cfg.params;
  const auto s = numbers(p.at("start"));
  const Trace t = trace(sys.B, Point{s[0], s[1], s[2]}, kTwoPi * num(p, "turns"), count(p, "n_out"), trace_options(p));
  Table tab{"trace", {"phi", "x", "y"}, {}};
  for (const auto& q : t.points) tab.rows.push_back({q.phi, q.x, q.y});
  r.tables = {tab};
  r.meta["steps"] = t.stats.steps;
  r.meta["rejected"] = t.stats.rejected;
}

void run_poincare(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const Params& p = cfg.params;
  Table tab{"poincare", {"seed", "transit", "x", "y"}, {}};
  const Json& seeds = p.at("seeds");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto orbit =
        poincare_orbit(sys.B, Vec2(seeds[i][0].get<double>(), seeds[i][1].get<double>()), count(p, "transits"),
                       trace_options(p));
    for (std::size_t k = 0; k < orbit.size(); ++k)
      tab.rows.push_back({static_cast<double>(i), static_cast<double>(k), orbit[k][0], orbit[k][1]});
  }
  r.tables = {tab};
}

// Requested p levels: explicit, or the levels whose toroidal flux is psi.
std::vector<double> surface_levels(const RunConfig& cfg, const LevelGeometry& geo, RunReport& r) {
  const Params& p = cfg.params;
  if (!p.at("levels").empty()) return numbers(p.at("levels"));
  std::vector<double> levels;
  for (double psi : numbers(p.at("psi"))) levels.push_back(level_for_flux(geo, psi));
  r.meta["levels_from_psi"] = levels;
  return levels;
}

void run_flux_profile(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const auto geo = make_level_geometry(sys, axis_guess(cfg));
  const auto levels = surface_levels(cfg, *geo, r);
  const FluxProfile f = flux_profile(*geo, levels, cfg.params.at("method").get<std::string>(), {}, cfg.threads);
  Table tab{"flux_profile", {"psi", "Psi_T", "Psi_P", "iota", "p", "dPsi_T_dp"}, {}};
  for (std::size_t i = 0; i < f.levels.size(); ++i)
    tab.rows.push_back({f.psiT[i], f.psiT[i], f.psiP[i], f.iota[i], f.levels[i], f.dpsiT_dlevel[i]});
  if (cfg.params.at("levels").empty()) {
    const auto psi = numbers(cfg.params.at("psi"));
    double e = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) e = std::max(e, std::abs(f.psiT[i] - psi[i]));
    add(r, "psi_label_mismatch", e, 1e-8);
  }
  r.tables = {tab};
  r.meta["method"] = f.method;
}

void chart_residuals(RunReport& r, const ChartResiduals& c, double tol, bool boozer, const std::string& prefix = "") {
  add(r, prefix + "b_psi", c.b_psi, tol);
  add(r, prefix + "b_theta_std", c.b_theta_std, tol);
  add(r, prefix + "b_zeta_std", c.b_zeta_std, tol);
  add(r, prefix + "j_theta_std", c.j_theta_std, tol);
  add(r, prefix + "j_zeta_std", c.j_zeta_std, tol);
  if (!boozer) add(r, prefix + "jacobian_std", c.jacobian_std, tol);
  if (boozer) {
    add(r, prefix + "cov_theta_std", c.cov_theta_std, tol);
    add(r, prefix + "cov_zeta_std", c.cov_zeta_std, tol);
  }
  add(r, prefix + "jacobian_min_ratio", c.jacobian_min_ratio);
}

void run_chart(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r, bool boozer) {
  const Params& p = cfg.params;
  const auto geo = make_level_geometry(sys, axis_guess(cfg));
  const auto levels = surface_levels(cfg, *geo, r);
  HamadaOptions opt;
  opt.surface.n_theta = count(p, "n_theta");
  opt.surface.n_zeta = count(p, "n_zeta");
  opt.threads = cfg.threads;
  const HamadaChart ch = boozer ? to_boozer(*geo, levels, opt) : to_hamada(*geo, levels, opt);
  chart_residuals(r, ch.residuals, num(p, "tol"), boozer);
  Table surf{"surfaces",
             {"psi", "p", "iota", "F_prime", "G_prime", "K_prime", "L_prime", "b_psi", "jacobian_std", "closedness"},
             {}};
  Table grid{"grid", {"surface", "i_theta", "i_zeta", "x", "y", "phi"}, {}};
  for (std::size_t s = 0; s < ch.surfaces.size(); ++s) {
    const auto& hs = ch.surfaces[s];
    const Mat2& fm = hs.flux_matrix;
    surf.rows.push_back({hs.chart.psi, hs.chart.level, hs.iota(), fm(0, 0), -fm(0, 1), fm(1, 0), -fm(1, 1),
                         hs.residuals.b_psi, hs.residuals.jacobian_std, hs.closedness});
    const int nt = hs.chart.n_theta, nz = hs.chart.n_zeta;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nz; ++j) {
        const Point& q = hs.chart.grid[static_cast<std::size_t>(i * nz + j)];
        grid.rows.push_back({static_cast<double>(s), static_cast<double>(i), static_cast<double>(j), q.x, q.y, q.phi});
      }
  }
  r.tables = {surf, grid};
  r.meta["kind"] = to_string(ch.kind);
}

NearAxisOptions near_axis_options(const RunConfig& cfg) {
  const Params& p = cfg.params;
  NearAxisOptions o;
  o.r_max = num(p, "r_max");
  o.n_r = count(p, "n_r");
  o.n_theta = count(p, "n_theta");
  o.n_phi = count(p, "n_phi");
  o.n_flux = count(p, "n_flux");
  o.n_axis = count(p, "n_axis");
  o.r_verify = num(p, "r_verify");
  o.ode_tol = num(p, "ode_tol");
  o.verify_trajectories = p.at("verify_trajectories").get<int>();
  o.route = p.at("route") == "sigma" ? NearAxisOptions::Route::Sigma : NearAxisOptions::Route::TwoForm;
  o.threads = cfg.threads;
  return o;
}

void normal_form_entries(RunReport& r, const NormalFormChart& nf, const NearAxisOptions& o, const Params& p) {
  const auto& n = nf.report;
  const double tol = num(p, "tol"), dtol = num(p, "drift_tol");
  add(r, "nf_beta_residual", n.beta_residual, tol);
  add(r, "nf_p_std", n.p_std, tol);
  add(r, "nf_psi_drift", n.psi_drift, dtol);
  add(r, "nf_tangency", n.tangency, dtol);
  add(r, "nf_trajectory_mismatch", n.trajectory_mismatch);
  add(r, "nf_max_period", n.max_period, o.period_tol);
  add(r, "nf_closedness", n.closedness);
  add(r, "nf_min_rank", n.min_rank);
  add(r, "mb_beta_axis_residual", nf.flux.mb.beta_axis_residual);
  add(r, "mb_quadratic_residual", nf.flux.mb.quadratic_residual);
  Json m;
  m["axis"] = axis_meta(nf.flux.mb.axis);
  m["c"] = nf.flux.mb.c;
  m["c_spread"] = nf.flux.mb.c_spread;
  m["cover_period"] = nf.flux.mb.cover_period;
  m["route"] = n.route;
  m["r_work"] = n.r_work;
  m["r_verify"] = n.r_verify;
  m["tried_radii"] = n.tried_radii;
  m["grid"] = Json::array({n.n_r, n.n_theta, n.n_phi});
  m["max_displacement"] = n.max_displacement;
  m["chart"] = nf.map->describe();
  r.meta["normal_form"] = m;
}

Table profile_table(const NormalFormChart& nf, const NAHChart* ch) {
  Table t{"profile", {"psi", "iota", "P", "Psi_P"}, {}};
  if (ch) t.columns.insert(t.columns.end(), {"K", "L", "K_prime", "L_prime", "V_prime"});
  const double psi_max = 0.5 * nf.report.r_work * nf.report.r_work;
  for (int i = 1; i <= 16; ++i) {
    const double psi = psi_max * i / 16.0;
    std::vector<double> row{psi, nf.iota(psi), nf.P(psi), nf.psi_p(psi)};
    if (ch) row.insert(row.end(), {ch->K(psi), ch->L(psi), ch->dK(psi), ch->dL(psi), ch->dV(psi)});
    t.rows.push_back(row);
  }
  return t;
}

void nah_entries(RunReport& r, const NAHChart& ch, double tol) {
  const auto& h = ch.report;
  add(r, "nah_beta_residual", h.beta_residual, tol);
  add(r, "nah_j_residual", h.j_residual, tol);
  add(r, "nah_jacobian_std", h.jacobian_std, tol);
  add(r, "nah_commutator_B", h.commutator_B, tol);
  add(r, "nah_commutator_J", h.commutator_J, tol);
  add(r, "nah_closedness", h.closedness);
  Json m;
  m["kind"] = to_string(ch.kind);
  m["r_lambda_min"] = h.r_lambda_min;
  m["r_lambda_axis_min"] = h.r_lambda_axis_min;
  m["r_lambda_bound"] = h.r_lambda_bound;
  m["r_work"] = h.r_work;
  m["r_verify"] = h.r_verify;
  m["max_displacement"] = h.max_displacement;
  r.meta["near_axis_chart"] = m;
}

void run_near_axis(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const NearAxisOptions o = near_axis_options(cfg);
  const double tol = num(cfg.params, "tol");
  const AxisReport axis = classify_axis(sys, find_axis(sys.B, axis_guess(cfg)));
  if (cfg.command == "near-axis-boozer") {
    const NAHChart ch = near_axis_boozer(sys, axis, o);
    normal_form_entries(r, ch.nf, o, cfg.params);
    nah_entries(r, ch, tol);
    chart_residuals(r, ch.boozer_residuals, tol, true, "restricted_");
    r.tables = {profile_table(ch.nf, &ch)};
    return;
  }
  const NormalFormChart nf = near_axis_normal_form(sys, axis, o);
  normal_form_entries(r, nf, o, cfg.params);
  if (cfg.command == "near-axis-normal-form") {
    r.tables = {profile_table(nf, nullptr)};
    return;
  }
  const NAHChart ch = near_axis_hamada(sys, nf, o);
  nah_entries(r, ch, tol);
  r.tables = {profile_table(nf, &ch)};
}

void run_embed(const RunConfig& cfg, const IntegrableSystem& sys, RunReport& r) {
  const Params& p = cfg.params;
  const bool dphi = p.at("eta") == "dphi";
  const auto pts = sample_points(static_cast<std::size_t>(count(p, "samples")), num(p, "radius"), cfg.seed);
  const EmbeddingReport e = verify_embedding(sys, dphi ? eta_dphi() : eta_bflat(sys), pts, dphi);
  const double tol = num(p, "tol");
  add(r, "x_h", e.max_xh, tol);
  add(r, "x_p", e.max_xp, tol);
  add(r, "poisson", e.max_poisson, tol);
  add(r, "antisymmetry", e.max_antisymmetry, tol);
  add(r, "pfaffian_covolume", e.max_pfaffian_covolume, tol);
  add(r, "slice", e.max_slice, tol);
  add(r, "d_omega", e.max_d_omega, num(p, "closure_tol"));
  r.meta["min_coisotropy"] = e.min_coisotropy;
  r.meta["min_pfaffian"] = e.min_pfaffian;
  r.meta["u_band"] = e.u_band;
}

}  // namespace

bool RunReport::accepted() const {
  for (const auto& e : residuals)
    if (!e.pass()) return false;
  return true;
}

RunReport run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport r;
  r.command = cfg.command;
  const IntegrableSystem sys = build_system(cfg);
  const std::string& c = cfg.command;
  if (c == "verify") run_verify(cfg, sys, r);
  else if (c == "find-axis") run_find_axis(cfg, sys, r);
  else if (c == "classify-axis") run_classify(cfg, sys, r);
  else if (c == "trace") run_trace(cfg, sys, r);
  else if (c == "poincare") run_poincare(cfg, sys, r);
  else if (c == "flux-profile") run_flux_profile(cfg, sys, r);
  else if (c == "hamada") run_chart(cfg, sys, r, false);
  else if (c == "boozer") run_chart(cfg, sys, r, true);
  else if (c.rfind("near-axis-", 0) == 0) run_near_axis(cfg, sys, r);
  else if (c == "embed-check") run_embed(cfg, sys, r);
  else throw Error(ErrorCode::SchemaError, "cli", "unknown command '" + c + "'", "command");
  r.exit_status = r.accepted() ? 0 : 3;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace ifield::cli
