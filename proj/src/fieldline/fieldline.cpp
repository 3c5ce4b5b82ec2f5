#include "ifield/fieldline.hpp"

#include <cmath>

namespace ifield {

namespace {

constexpr const char* kModule = "fieldline";

OdeOptions ode_options(const TraceOptions& opt) {
  OdeOptions o;
  o.abs_tol = opt.tol;
  o.rel_tol = opt.tol;
  o.h_init = 1e-2;
  return o;
}

Vec3 checked_field(const VectorField& B, const Point& q, const TraceOptions& opt) {
  if (!std::isfinite(q.x) || !std::isfinite(q.y) || std::hypot(q.x, q.y) > opt.r_max)
    throw Error(ErrorCode::DomainExit, kModule, "field line left the domain",
                "x=" + std::to_string(q.x) + " y=" + std::to_string(q.y) + " phi=" + std::to_string(q.phi));
  const Vec3 b = B(q);
  if (!(std::abs(b[2]) >= opt.bphi_min))
    throw Error(ErrorCode::TorBFieldVanishes, kModule, "toroidal component of B vanishes",
                "phi=" + std::to_string(q.phi) + " Bphi=" + std::to_string(b[2]));
  return b;
}

std::vector<double> uniform_outputs(double t0, double span, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = t0 + span * (i + 1) / n;
  return out;
}

}  // namespace

Trace trace(const VectorField& B, const Point& start, double phi_span, int n_out, const TraceOptions& opt) {
  if (n_out < 1) throw Error(ErrorCode::InvalidParameter, kModule, "trace needs n_out >= 1");
  Trace tr;
  tr.tol = opt.tol;
  tr.points.push_back(start);
  State<2> s{start.x, start.y};
  auto rhs = [&](double phi, const State<2>& z, State<2>& d) {
    const Vec3 b = checked_field(B, Point{z[0], z[1], phi}, opt);
    d = {b[0] / b[2], b[1] / b[2]};
  };
  tr.stats = integrate_outputs<2>(rhs, s, start.phi, uniform_outputs(start.phi, phi_span, n_out), ode_options(opt),
                                  [&](double phi, const State<2>& z) { tr.points.push_back({z[0], z[1], phi}); });
  return tr;
}

PoincareResult poincare_map(const VectorField& B, const Vec2& z, bool with_jacobian, double phi0, double span,
                            const TraceOptions& opt) {
  PoincareResult res;
  if (!with_jacobian) {
    State<2> s{z[0], z[1]};
    auto rhs = [&](double phi, const State<2>& q, State<2>& d) {
      const Vec3 b = checked_field(B, Point{q[0], q[1], phi}, opt);
      d = {b[0] / b[2], b[1] / b[2]};
    };
    res.stats = integrate_to<2>(rhs, s, phi0, phi0 + span, ode_options(opt));
    res.point = Vec2(s[0], s[1]);
    return res;
  }
  State<6> s{z[0], z[1], 1.0, 0.0, 0.0, 1.0};
  auto rhs = [&](double phi, const State<6>& q, State<6>& d) {
    const Point pt{q[0], q[1], phi};
    const Vec3 b = checked_field(B, pt, opt);
    const Mat3 Jb = B.jac(pt);
    Mat2 A;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) A(i, j) = (Jb(i, j) * b[2] - b[i] * Jb(2, j)) / (b[2] * b[2]);
    Mat2 M;
    M << q[2], q[3], q[4], q[5];
    const Mat2 dM = A * M;
    d = {b[0] / b[2], b[1] / b[2], dM(0, 0), dM(0, 1), dM(1, 0), dM(1, 1)};
  };
  res.stats = integrate_to<6>(rhs, s, phi0, phi0 + span, ode_options(opt));
  res.point = Vec2(s[0], s[1]);
  Mat2 M;
  M << s[2], s[3], s[4], s[5];
  res.jacobian = M;
  return res;
}

std::vector<Vec2> poincare_orbit(const VectorField& B, const Vec2& seed, int n_transits, const TraceOptions& opt) {
  const Trace tr = trace(B, Point{seed[0], seed[1], 0.0}, kTwoPi * n_transits, std::max(1, n_transits), opt);
  std::vector<Vec2> out;
  out.reserve(tr.points.size());
  for (const auto& p : tr.points) out.emplace_back(p.x, p.y);
  return out;
}

// ---------------------------------------------------------------------------

Vec2 ClosedOrbit::at(double phi) const { return series.eval(phi, 0); }
Vec2 ClosedOrbit::derivative(double phi) const { return series.eval(phi, 1); }
Vec2 ClosedOrbit::second_derivative(double phi) const { return series.eval(phi, 2); }

ClosedOrbit find_axis(const VectorField& B, const Vec2& guess, const AxisOptions& opt) {
  ClosedOrbit orbit;
  Vec2 z = guess;
  double res_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    const PoincareResult pr = poincare_map(B, z, true, 0.0, kTwoPi, opt.trace);
    const Vec2 F = pr.point - z;
    res_norm = F.norm();
    orbit.newton_residuals.push_back(res_norm);
    if (res_norm < opt.tol) {
      converged = true;
      break;
    }
    const Mat2 K = *pr.jacobian - Mat2::Identity();
    if (std::abs(K.determinant()) < opt.singular_det)
      throw Error(ErrorCode::SingularJacobian, kModule, "DP - I is singular at the Newton iterate",
                  "det=" + std::to_string(K.determinant()));
    Vec2 step = -K.inverse() * F;
    // backtrack when the residual grows
    double lam = 1.0;
    for (int bt = 0; bt < 8; ++bt) {
      const Vec2 trial = z + lam * step;
      try {
        const double r = (poincare_map(B, trial, false, 0.0, kTwoPi, opt.trace).point - trial).norm();
        if (r < res_norm || lam < 0.02) break;
      } catch (const Error&) {
      }
      lam *= 0.5;
    }
    z += lam * step;
    if (!std::isfinite(z[0]) || !std::isfinite(z[1])) break;
  }
  if (!converged)
    throw Error(ErrorCode::NewtonDivergence, kModule, "axis Newton iteration did not converge",
                "residual=" + std::to_string(res_norm));
  orbit.residual = res_norm;
  orbit.period = kTwoPi;
  const Trace tr = trace(B, Point{z[0], z[1], 0.0}, kTwoPi, opt.n_samples, opt.trace);
  std::vector<Eigen::VectorXd> samples;
  for (int k = 0; k < opt.n_samples; ++k) {
    orbit.samples.emplace_back(tr.points[k].x, tr.points[k].y);
    samples.push_back(orbit.samples.back());
  }
  orbit.series = PeriodicSeries(samples, kTwoPi);
  return orbit;
}

MonodromyMatrix monodromy(const VectorField& B, const ClosedOrbit& axis, const TraceOptions& opt) {
  MonodromyMatrix mm;
  mm.m = *poincare_map(B, axis.at(0.0), true, 0.0, kTwoPi, opt).jacobian;
  if (mm.m.trace() < -2.0) mm.cover = mm.m * mm.m;
  return mm;
}

const char* to_string(AxisKind k) {
  switch (k) {
    case AxisKind::Elliptic: return "elliptic";
    case AxisKind::DirectHyperbolic: return "direct_hyperbolic";
    case AxisKind::ReflectionHyperbolic: return "reflection_hyperbolic";
  }
  return "?";
}

int poloidal_orientation(const IntegrableSystem& sys, const Point& pt) {
  const double w = sys.omega.rho(pt) * sys.B(pt)[2];
  return w >= 0.0 ? 1 : -1;
}

AxisReport classify_axis(const IntegrableSystem& sys, const ClosedOrbit& axis, const TraceOptions& opt) {
  AxisReport rep;
  rep.orbit = axis;
  rep.monodromy = monodromy(sys.B, axis, opt);
  const double tr = rep.monodromy.trace();
  const double det = rep.monodromy.det();
  if (std::abs(det - 1.0) > 1e-6)
    throw Error(ErrorCode::InvariantViolation, kModule, "monodromy is not area preserving",
                "det=" + std::to_string(det));
  if (std::abs(std::abs(tr) - 2.0) < 1e-6)
    throw Error(ErrorCode::DegenerateAxis, kModule, "parabolic monodromy, |tr M| = 2", "tr=" + std::to_string(tr));
  if (std::abs(tr) < 2.0) rep.kind = AxisKind::Elliptic;
  else if (tr > 2.0) rep.kind = AxisKind::DirectHyperbolic;
  else rep.kind = AxisKind::ReflectionHyperbolic;

  const Vec2 a0 = axis.at(0.0);
  const Point p0{a0[0], a0[1], 0.0};
  rep.orientation = poloidal_orientation(sys, p0);
  rep.p_axis = sys.p(p0);

  const int n = 32;
  double c_sum = 0.0, c_min = 1e300, c_max = 0.0;
  int pos_det = 0, neg_det = 0;
  for (int k = 0; k < n; ++k) {
    const double phi = kTwoPi * k / n;
    const Vec2 a = axis.at(phi);
    const Point q{a[0], a[1], phi};
    const Mat2 H = sys.p.hess(q).topLeftCorner<2, 2>();
    const double dH = H.determinant();
    (dH > 0 ? pos_det : neg_det)++;
    const double f = sys.omega.rho(q) * sys.B(q)[2];  // -b_yx
    const double c = std::sqrt(std::abs(dH)) / std::abs(f);
    c_sum += c;
    c_min = std::min(c_min, c);
    c_max = std::max(c_max, c);
    if (k == 0) {
      Eigen::SelfAdjointEigenSolver<Mat2> es(H);
      for (int i = 0; i < 2; ++i) (es.eigenvalues()[i] > 0 ? rep.hessian_pos : rep.hessian_neg)++;
    }
  }
  rep.hessian_c = c_sum / n;
  rep.hessian_c_spread = (c_max - c_min) / rep.hessian_c;
  const bool definite = (pos_det == n);
  const bool indefinite = (neg_det == n);
  if ((rep.kind == AxisKind::Elliptic && !definite) || (rep.kind != AxisKind::Elliptic && !indefinite))
    throw Error(ErrorCode::InconsistentClassification, kModule,
                "monodromy class disagrees with the transverse Hessian of p",
                std::string("kind=") + to_string(rep.kind) + " positive_det=" + std::to_string(pos_det) + "/" +
                    std::to_string(n));
  const Mat2& M = rep.monodromy.m;
  if (rep.kind == AxisKind::Elliptic) {
    const double w = std::acos(std::clamp(0.5 * tr, -1.0, 1.0));
    const double sgn = (M(1, 0) >= 0 ? 1.0 : -1.0) * rep.orientation;
    rep.iota0 = sgn * w / kTwoPi;
  } else {
    rep.iota0 = rep.kind == AxisKind::ReflectionHyperbolic ? 0.5 : 0.0;
  }
  return rep;
}

IotaEstimate iota_fieldline(const VectorField& B, const Vec2& seed, int n_transits, const ClosedOrbit& axis,
                            int orientation, const TraceOptions& opt) {
  if (n_transits < 2) throw Error(ErrorCode::InvalidParameter, kModule, "iota_fieldline needs >= 2 transits");
  const int sub = 16;
  const Trace tr = trace(B, Point{seed[0], seed[1], 0.0}, kTwoPi * n_transits, sub * n_transits, opt);
  std::vector<double> theta(tr.points.size());
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    const Point& q = tr.points[i];
    const Vec2 d = Vec2(q.x, q.y) - axis.at(q.phi);
    double th = std::atan2(orientation * d[1], d[0]);
    if (i > 0) th = unwrap_near(th, theta[i - 1]);
    theta[i] = th;
  }
  IotaEstimate est;
  est.transits = n_transits;
  // weighted Birkhoff average of the per-transit increments
  double wsum = 0.0, acc = 0.0;
  for (int k = 0; k < n_transits; ++k) {
    const double t = (k + 0.5) / n_transits;
    const double w = std::exp(-1.0 / (t * (1.0 - t)));
    acc += w * (theta[(k + 1) * sub] - theta[k * sub]);
    wsum += w;
  }
  est.iota = acc / wsum / kTwoPi;
  // linear least squares theta = a + iota * phi
  const std::size_t n = tr.points.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = tr.points[i].phi;
    sx += x;
    sy += theta[i];
    sxx += x * x;
    sxy += x * theta[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double rms = 0.0;
  for (std::size_t i = 0; i < n; ++i) rms += std::pow(theta[i] - icpt - slope * tr.points[i].phi, 2);
  est.iota_linear_fit = slope;
  est.fit_rms = std::sqrt(rms / n);
  return est;
}

}  // namespace ifield
