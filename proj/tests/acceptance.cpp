// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ifield/embedding.hpp"
#include "ifield/near_axis.hpp"

using namespace ifield;

namespace {

struct Check {
  std::string name;
  double value;
  double limit;
  bool ok;
};

class Criterion {
 public:
  // value < limit
  void below(const std::string& name, double value, double limit) {
    checks_.push_back({name, value, limit, value < limit});
  }
  void above(const std::string& name, double value, double limit) {
    checks_.push_back({name, value, limit, value > limit});
  }
  void require(const std::string& name, bool ok) { checks_.push_back({name, ok ? 1.0 : 0.0, 1.0, ok}); }
  const std::vector<Check>& checks() const { return checks_; }

 private:
  std::vector<Check> checks_;
};

ModelSpec spec(ModelKind k) {
  ModelSpec s;
  s.kind = k;
  return s;
}

IntegrableSystem model(ModelKind k) { return make_model(spec(k)); }

DiffeoPtr disguise() { return compose({make_wobble(0.1), make_shear(0.0, 0.3, 1)}); }

AxisReport axis_of(const IntegrableSystem& sys, const Vec2& guess) {
  return classify_axis(sys, find_axis(sys.B, guess));
}

Vec3 beta_at(const IntegrableSystem& sys, const Point& q) { return two_form_from_dual(sys.omega.rho(q) * sys.B(q)); }

void c1(Criterion& c) {
  const auto pts = sample_points(500, 0.5, 1);
  for (ModelKind k : {ModelKind::A, ModelKind::A_MHS, ModelKind::B, ModelKind::C}) {
    const auto sys = model(k);
    const auto r = integrability_residuals(sys, pts);
    c.below(sys.label + " commutator", r.max_commutator, 1e-10);
    c.below(sys.label + " i_J beta - dp", r.max_ijbeta_dp, 1e-10);
  }
  // J + x B: x is not constant along B
  auto bad = model(ModelKind::A);
  const VectorField B = bad.B, J = bad.J;
  bad.J.eval = [B, J](const Point& q) -> Vec3 { return J(q) + q.x * B(q); };
  bad.J.jacobian = nullptr;
  c.above("perturbed J commutator", integrability_residuals(bad, pts).max_commutator, 1e-3);
}

void c2(Criterion& c) {
  ModelSpec a = spec(ModelKind::A);
  a.iota0 = 0.3;
  const auto ra = axis_of(make_model(a), Vec2(0.01, 0.0));
  c.below("A trace - 2cos(0.6 pi)", std::abs(ra.monodromy.trace() - 2.0 * std::cos(0.6 * kPi)), 1e-8);
  ModelSpec b = spec(ModelKind::B);
  b.k = 0.1;
  const auto rb = axis_of(make_model(b), Vec2(0.01, 0.01));
  c.below("B trace - 2cosh(0.2 pi)", std::abs(rb.monodromy.trace() - 2.0 * std::cosh(0.2 * kPi)), 1e-8);
  c.below("B det - 1", std::abs(rb.monodromy.det() - 1.0), 1e-8);
  const auto rc = axis_of(model(ModelKind::C), Vec2(0.01, 0.0));
  const Eigen::EigenSolver<Mat2> es(rc.monodromy.m);
  for (int i = 0; i < 2; ++i) {
    c.below("C multiplier " + std::to_string(i) + " |imag|", std::abs(es.eigenvalues()[i].imag()), 1e-12);
    c.below("C multiplier " + std::to_string(i) + " real", es.eigenvalues()[i].real(), 0.0);
  }
  c.require("C classified reflection_hyperbolic", rc.kind == AxisKind::ReflectionHyperbolic);
}

void c3(Criterion& c) {
  const auto sys = model(ModelKind::A);
  const auto geo = make_level_geometry(sys);
  std::vector<double> levels;
  for (int i = 1; i <= 8; ++i) levels.push_back(0.01 * i);
  const auto prof = flux_profile(*geo, levels);
  FluxOptions stokes;
  stokes.force_fallback = true;
  double agree = 0, exact_a = 0, exact_f = 0, psit = 0, st = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double psi = levels[i], iota = 0.3 + 0.1 * psi;
    const Point seed = geo->poloidal_point(levels[i], 0.0, 0.0);
    const auto est = iota_fieldline(sys.B, Vec2(seed.x, seed.y), 200, geo->axis(), geo->orientation());
    agree = std::max(agree, std::abs(prof.iota[i] - est.iota));
    exact_a = std::max(exact_a, std::abs(prof.iota[i] - iota));
    exact_f = std::max(exact_f, std::abs(est.iota - iota));
    psit = std::max(psit, std::abs(prof.psiT[i] - psi));
    st = std::max({st, std::abs(toroidal_flux(*geo, levels[i], stokes) - toroidal_flux(*geo, levels[i])),
                   std::abs(poloidal_flux(*geo, levels[i], stokes) - poloidal_flux(*geo, levels[i]))});
  }
  c.below("iota actions vs field lines", agree, 1e-5);
  c.below("iota actions vs 0.3 + 0.1 psi", exact_a, 1e-5);
  c.below("iota field lines vs 0.3 + 0.1 psi", exact_f, 1e-5);
  c.below("Psi_T - psi", psit, 1e-8);
  c.below("Stokes vs line integral", st, 1e-8);
}

void c4(Criterion& c) {
  const auto sys = pushforward(model(ModelKind::A), disguise());
  const std::vector<double> levels = {0.01, 0.02, 0.03, 0.04};
  const auto ch = to_hamada(sys, levels);
  const auto& r = ch.residuals;
  c.below("|B^psi|", r.b_psi, 1e-7);
  c.below("std B^theta", r.b_theta_std, 1e-6);
  c.below("std B^zeta", r.b_zeta_std, 1e-6);
  c.below("std Jacobian", r.jacobian_std, 1e-6);
  Mat2i A;
  A << 1, 1, 0, 1;
  const auto t = sl2z_transform(sys, ch, A);
  c.below("transformed |B^psi|", t.residuals.b_psi, 1e-7);
  c.below("transformed straightness", t.residuals.max_straightness(), 1e-6);
  c.below("transformed std Jacobian", t.residuals.jacobian_std, 1e-6);
  double rel = 0, model_a = 0, model_t = 0;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const double iota = 0.3 + 0.1 * ch.surfaces[s].chart.psi;
    const Mat2 expect = ch.surfaces[s].flux_matrix * A.cast<double>().inverse();
    rel = std::max(rel, (t.surfaces[s].flux_matrix - expect).cwiseAbs().maxCoeff());
    Mat2 m1, m2;
    m1 << 1.0, -iota, 0.0, -1.0;
    m2 << 1.0, -1.0 - iota, 0.0, -1.0;
    model_a = std::max(model_a, (ch.surfaces[s].flux_matrix - m1).cwiseAbs().maxCoeff());
    model_t = std::max(model_t, (t.surfaces[s].flux_matrix - m2).cwiseAbs().maxCoeff());
  }
  c.below("Psi2 - Psi1 A^-1", rel, 1e-8);
  c.below("Psi1 - [[1,-iota],[0,-1]]", model_a, 1e-8);
  c.below("Psi2 - [[1,-1-iota],[0,-1]]", model_t, 1e-8);
}

void c5(Criterion& c) {
  const auto sys = pushforward(model(ModelKind::A_MHS), disguise());
  const auto geo = make_level_geometry(sys, Vec2(0.1, 0.0));
  std::vector<double> levels;
  for (double psi : {0.01, 0.02, 0.03, 0.04}) levels.push_back(level_for_flux(*geo, psi));
  const auto ch = to_boozer(*geo, levels);
  c.below("std B_theta (covariant)", ch.residuals.cov_theta_std, 1e-6);
  c.below("std B_zeta (covariant)", ch.residuals.cov_zeta_std, 1e-6);
  c.below("straightness", ch.residuals.max_straightness(), 1e-6);
  ErrorCode code = ErrorCode::InvariantViolation;
  try {
    ModelSpec a = spec(ModelKind::A);
    a.iota2 = 0.1;
    to_boozer(make_model(a), {0.02});
  } catch (const Error& e) {
    code = e.code();
  }
  c.require("NotMHS for Model A (iota2 = 0.1, flat metric)", code == ErrorCode::NotMHS);
}

void c6(Criterion& c) {
  const auto sys = pushforward(model(ModelKind::A), disguise());
  const auto axis = axis_of(sys, Vec2(0.1, 0.0));
  const auto nf = near_axis_normal_form(sys, axis);
  const auto& r = nf.report;
  c.require("verification grid 16x16x32 within 0.05", r.r_verify == 0.05);
  c.below("|Phi^* beta - beta_*|", r.beta_residual, 1e-6);
  c.below("angular std of p at fixed psi", r.p_std, 1e-6);
  c.below("Moser psi drift", r.psi_drift, 1e-8);
  // refinement where discretization error dominates the round-off floor
  auto residual = [&](int n_r, int n) {
    NearAxisOptions opt;
    opt.n_r = n_r;
    opt.n_theta = opt.n_phi = n;
    opt.n_flux = 12;
    opt.verify_trajectories = 0;
    const auto fc = flux_coordinates(sys, morse_bott_normalize(sys, axis, opt), opt);
    return moser_normalize(sys, fc, opt).report.beta_residual;
  };
  const double e1 = residual(2, 8), e2 = residual(3, 12);
  c.above("observed order (2,8) -> (3,12)", std::log(e1 / e2) / std::log(1.5), 2.0);
}

void c7(Criterion& c) {
  ModelSpec s = spec(ModelKind::A);
  s.rho_eps = 0.1;
  const auto sys = make_model(s);
  const auto nf = near_axis_normal_form(sys, axis_of(sys, Vec2(0.0, 0.0)));
  const auto ch = near_axis_hamada(sys, nf);
  const NAHState st{&ch};
  double e = 0;
  for (int k = 0; k < 32; ++k)
    for (int l = 0; l <= 8; ++l) {
      const double phi = kTwoPi * k / 32, lam = l / 8.0;
      e = std::max(e, std::abs(st.r_lambda(Point{0.0, 0.0, phi}, lam) - ((1 - lam) + lam / (1 + 0.1 * std::cos(phi)))));
    }
  c.below("r_lambda on axis vs (1-l) + l/(1 + 0.1 cos phi)", e, 1e-9);
  c.below("bound - 0.9/1.1", std::abs(ch.report.r_lambda_bound - 0.9 / 1.1), 1e-12);
  c.above("min r_lambda on axis - bound", ch.report.r_lambda_axis_min - ch.report.r_lambda_bound, -1e-12);
  c.below("|Phi^* beta - (dy^dx - G' dpsi^dphi)|", ch.report.beta_residual, 1e-6);
  c.below("|Phi^* j - (K' dy^dx - L' dpsi^dphi)|", ch.report.j_residual, 1e-6);
  c.below("std Jacobian", ch.report.jacobian_std, 1e-6);
  c.below("[d_zeta, B]", ch.report.commutator_B, 1e-6);
  c.below("[d_zeta, J]", ch.report.commutator_J, 1e-6);
}

void c8(Criterion& c) {
  const auto sys = pushforward(model(ModelKind::A_MHS), disguise());
  const auto ch = near_axis_boozer(sys, axis_of(sys, Vec2(0.1, 0.0)));
  c.below("NAB beta residual", ch.report.beta_residual, 1e-6);
  c.below("NAB j residual", ch.report.j_residual, 1e-6);
  c.below("NAB std Jacobian", ch.report.jacobian_std, 1e-6);
  c.below("NAB [d_zeta, B]", ch.report.commutator_B, 1e-6);
  c.below("NAB [d_zeta, J]", ch.report.commutator_J, 1e-6);
  const auto& b = ch.boozer_residuals;
  c.below("restriction |B^psi|", b.b_psi, 1e-6);
  c.below("restriction straightness", b.max_straightness(), 1e-6);
  c.below("restriction std B_theta", b.cov_theta_std, 1e-6);
  c.below("restriction std B_zeta", b.cov_zeta_std, 1e-6);
  c.above("restriction Jacobian min/max", b.jacobian_min_ratio, 0.0);
}

void c9(Criterion& c) {
  const auto pts = sample_points(100, 0.3, 9);
  for (ModelKind k : {ModelKind::A, ModelKind::A_MHS, ModelKind::B, ModelKind::C}) {
    const auto sys = model(k);
    const auto r = verify_embedding(sys, eta_dphi(), pts, true);
    c.below(sys.label + " Pf vs beta^eta", r.max_pfaffian_covolume, 1e-10);
    c.below(sys.label + " X_H - B/eta(B)", r.max_xh, 1e-9);
    c.below(sys.label + " X_p - (J - eta(J)/eta(B) B)", r.max_xp, 1e-9);
    c.below(sys.label + " {p, H}", r.max_poisson, 1e-10);
    c.below(sys.label + " d omega", r.max_d_omega, 1e-7);
  }
}

void c10(Criterion& c) {
  const auto pts = sample_points(100, 0.4, 13);
  for (ModelKind k : {ModelKind::A, ModelKind::B}) {
    const auto sys = model(k);
    const auto lr = lemma_checks(sys, pts);
    c.below(sys.label + " d beta", lr.beta_closed, 1e-8);
    c.below(sys.label + " i_B dp", lr.b_dot_grad_p, 1e-8);
    double wedge = 0, round = 0;
    for (const auto& q : pts) {
      const Vec3 b = beta_at(sys, q), g = sys.p.grad(q);
      // beta ^ dp = (b_yphi p_x - b_xphi p_y - b_yx p_phi) dx^dy^dphi
      wedge = std::max(wedge, std::abs(b[2] * g[0] - b[1] * g[1] - b[0] * g[2]));
      // i_J beta satisfies the precondition; the solution is J projected off B
      const Vec3 B = sys.B(q), J = sys.J(q);
      const Vec3 alpha = -two_form_matrix(b) * J;
      const Vec3 X = bhat_solve(b, B, alpha);
      round = std::max(round, (X - (J - (J.dot(B) / B.dot(B)) * B)).norm());
    }
    c.below(sys.label + " beta ^ dp", wedge, 1e-8);
    c.below(sys.label + " bhat round trip", round, 1e-8);
    c.below(sys.label + " i_[B,J] Omega - (div J) beta", lr.bracket_identity, 1e-8);
    c.below(sys.label + " div J (commutator vanishes)", lr.div_J, 1e-8);
    c.below(sys.label + " [B, J]", integrability_residuals(sys, pts).max_commutator, 1e-8);
    // the equivalence in the other direction: breaking one breaks the other
    auto bad = sys;
    const VectorField B = sys.B, J = sys.J;
    bad.J.eval = [B, J](const Point& q) -> Vec3 { return J(q) + q.x * B(q); };
    bad.J.jacobian = nullptr;
    const auto br = lemma_checks(bad, pts);
    c.below(sys.label + " perturbed: identity still holds", br.bracket_identity, 1e-8);
    c.above(sys.label + " perturbed: div J", br.div_J, 1e-3);
    c.above(sys.label + " perturbed: [B, J]", integrability_residuals(bad, pts).max_commutator, 1e-3);
  }
}

}  // namespace

int main() {
  struct Entry {
    int id;
    double budget;  // seconds
    std::function<void(Criterion&)> fn;
    const char* title;
  };
  const std::vector<Entry> all = {
      {1, 5, c1, "integrability residual suite"},
      {2, 5, c2, "axis classification oracle"},
      {3, 30, c3, "flux / iota cross-validation"},
      {4, 60, c4, "Hamada chart and SL(2,Z) transform"},
      {5, 60, c5, "Boozer chart and NotMHS"},
      {6, 300, c6, "near-axis normal form"},
      {7, 300, c7, "near-axis Hamada"},
      {8, 300, c8, "near-axis Boozer"},
      {9, 10, c9, "embedding suite"},
      {10, 10, c10, "lemma property suite"},
  };
  int failed = 0;
  for (const auto& e : all) {
    Criterion c;
    std::string error;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(c);
    } catch (const Error& err) {
      error = std::string(to_string(err.code())) + ": " + err.what() + " [" + err.context() + "]";
    } catch (const std::exception& err) {
      error = err.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = error.empty() && dt < e.budget && !c.checks().empty();
    for (const auto& k : c.checks()) ok = ok && k.ok;
    std::printf("criterion %2d %s  %-38s %7.2f s (budget %g s)\n", e.id, ok ? "PASS" : "FAIL", e.title, dt, e.budget);
    for (const auto& k : c.checks())
      std::printf("    %-4s %-52s %.3e (limit %.1e)\n", k.ok ? "ok" : "BAD", k.name.c_str(), k.value, k.limit);
    if (!error.empty()) std::printf("    error: %s\n", error.c_str());
    std::fflush(stdout);
    failed += ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
