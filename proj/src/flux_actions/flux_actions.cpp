#include "ifield/flux_actions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/roots.hpp>

namespace ifield {

namespace {

constexpr const char* kModule = "flux_actions";
constexpr double kRtol = 1e-10;
constexpr int kNmax = 1 << 14;

std::string level_ctx(double level) { return "level=" + std::to_string(level); }

}  // namespace

LoopIntegral loop_integral(const OneForm& alpha, const Loop& loop, int n_quad) {
  if (n_quad < 16) throw Error(ErrorCode::InvalidParameter, kModule, "loop_integral needs n_quad >= 16");
  const Point a = loop.point(0.0), b = loop.point(kTwoPi);
  const double expected_dphi = loop.homology == Loop::Homology::Toroidal ? kTwoPi : 0.0;
  const double gap = std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(b.phi - a.phi - expected_dphi)});
  if (gap > 1e-8)
    throw Error(ErrorCode::NonClosedLoop, kModule, "loop does not close", "gap=" + std::to_string(gap));
  auto tangent = [&](double t) -> Vec3 {
    if (loop.tangent) return loop.tangent(t);
    const double h = 1e-4;
    return (loop.point(t - 2 * h).vec() - 8.0 * loop.point(t - h).vec() + 8.0 * loop.point(t + h).vec() -
            loop.point(t + 2 * h).vec()) /
           (12.0 * h);
  };
  const auto q = periodic_trapezoid([&](double t) { return alpha(loop.point(t)).dot(tangent(t)); }, n_quad, kRtol,
                                    kNmax, 1e-16);
  return {q.value / kTwoPi, q.n, q.converged};
}

// ---------------------------------------------------------------------------

LevelGeometry::LevelGeometry(IntegrableSystem sys, ClosedOrbit axis, int orientation, double r_search)
    : sys_(std::move(sys)), axis_(std::move(axis)), orientation_(orientation), r_search_(r_search) {
  const Vec2 a0 = axis_.at(0.0);
  p_axis_ = sys_.p(Point{a0[0], a0[1], 0.0});
}

double LevelGeometry::radius(double level, double phi, const Vec2& e, double s_guess) const {
  const double dl = level - p_axis_;
  if (dl == 0.0) return 0.0;
  const Vec2 a = axis_.at(phi);
  auto at = [&](double s) { return Point{a[0] + s * e[0], a[1] + s * e[1], phi}; };
  auto g = [&](double s) { return sys_.p(at(s)) - level; };
  double s0 = s_guess;
  if (!(s0 > 0.0)) {
    const Mat2 H = sys_.p.hess(at(0.0)).topLeftCorner<2, 2>();
    const double q = e.dot(H * e);
    if (q * dl <= 0.0)
      throw Error(ErrorCode::LevelOutOfRange, kModule, "level not reached along ray", level_ctx(level));
    s0 = std::sqrt(2.0 * dl / q);
  }
  // bracket the crossing
  const double sign0 = dl > 0 ? -1.0 : 1.0;  // sign of g(0)
  double lo = 0.0, hi = std::min(s0, r_search_);
  while (g(hi) * sign0 > 0.0) {
    lo = hi;
    hi *= 1.5;
    if (hi > r_search_)
      throw Error(ErrorCode::LevelOutOfRange, kModule, "level not bracketed within search radius", level_ctx(level));
  }
  const double guess = std::clamp(s0, lo, hi);
  auto fdf = [&](double s) {
    const Point q = at(s);
    const Vec3 gp = sys_.p.grad(q);
    return std::make_pair(sys_.p(q) - level, gp[0] * e[0] + gp[1] * e[1]);
  };
  std::uintmax_t iters = 100;
  const double s = boost::math::tools::newton_raphson_iterate(fdf, guess, lo, hi, 50, iters);
  if (!std::isfinite(s) || s <= 0.0)
    throw Error(ErrorCode::LevelOutOfRange, kModule, "radial root solve failed", level_ctx(level));
  return s;
}

double LevelGeometry::radius_level_derivative(double /*level*/, double phi, const Vec2& e, double s) const {
  const Vec2 a = axis_.at(phi);
  const Vec3 gp = sys_.p.grad(Point{a[0] + s * e[0], a[1] + s * e[1], phi});
  return 1.0 / (gp[0] * e[0] + gp[1] * e[1]);
}

Point LevelGeometry::poloidal_point(double level, double phi, double t) const {
  const Vec2 e = direction(t);
  const double s = radius(level, phi, e);
  const Vec2 a = axis_.at(phi);
  return {a[0] + s * e[0], a[1] + s * e[1], phi};
}

Vec3 LevelGeometry::poloidal_tangent(double level, double phi, double t) const {
  const Vec2 e = direction(t);
  const Vec2 de(-std::sin(t), orientation_ * std::cos(t));
  const double s = radius(level, phi, e);
  const Vec2 a = axis_.at(phi);
  const Vec3 gp = sys_.p.grad(Point{a[0] + s * e[0], a[1] + s * e[1], phi});
  const Vec2 g2(gp[0], gp[1]);
  const double ds = -s * g2.dot(de) / g2.dot(e);
  const Vec2 v = ds * e + s * de;
  return {v[0], v[1], 0.0};
}

Loop LevelGeometry::poloidal_loop(double level, double phi) const {
  Loop loop;
  loop.homology = Loop::Homology::Poloidal;
  loop.point = [this, level, phi](double t) { return poloidal_point(level, phi, t); };
  loop.tangent = [this, level, phi](double t) { return poloidal_tangent(level, phi, t); };
  return loop;
}

Loop LevelGeometry::toroidal_loop(double level, double t0) const {
  Loop loop;
  loop.homology = Loop::Homology::Toroidal;
  const Vec2 e = direction(t0);
  loop.point = [this, level, e](double phi) {
    const double s = radius(level, phi, e);
    const Vec2 a = axis_.at(phi);
    return Point{a[0] + s * e[0], a[1] + s * e[1], phi};
  };
  loop.tangent = [this, level, e](double phi) -> Vec3 {
    const double s = radius(level, phi, e);
    const Vec2 a = axis_.at(phi), da = axis_.derivative(phi);
    const Vec3 gp = sys_.p.grad(Point{a[0] + s * e[0], a[1] + s * e[1], phi});
    const Vec2 g2(gp[0], gp[1]);
    const double ds = -(g2.dot(da) + gp[2]) / g2.dot(e);
    const Vec2 v = da + ds * e;
    return {v[0], v[1], 1.0};
  };
  return loop;
}

Vec3 LevelGeometry::level_normal(const Point& q, double t) const {
  const Vec2 e = direction(t);
  const Vec3 gp = sys_.p.grad(q);
  const double d = gp[0] * e[0] + gp[1] * e[1];
  return {e[0] / d, e[1] / d, 0.0};
}

std::shared_ptr<LevelGeometry> make_level_geometry(const IntegrableSystem& sys, const Vec2& guess, double r_search) {
  const ClosedOrbit axis = find_axis(sys.B, guess);
  const AxisReport rep = classify_axis(sys, axis);
  if (rep.kind != AxisKind::Elliptic)
    throw Error(ErrorCode::HyperbolicUnsupported, kModule, "flux surfaces require an elliptic axis",
                to_string(rep.kind));
  return std::make_shared<LevelGeometry>(sys, axis, rep.orientation, r_search);
}

// ---------------------------------------------------------------------------

namespace {

double stokes_toroidal(const LevelGeometry& geo, double level, int n_quad) {
  const auto& sys = geo.system();
  const int o = geo.orientation();
  const Vec2 a = geo.axis().at(0.0);
  auto inner = [&](double t) {
    const Vec2 e = geo.direction(t);
    const double s = geo.radius(level, 0.0, e);
    return gauss_legendre(
        [&](double u) {
          const Point q{a[0] + u * s * e[0], a[1] + u * s * e[1], 0.0};
          return sys.omega.rho(q) * sys.B(q)[2] * o * u * s * s;
        },
        0.0, 1.0);
  };
  return periodic_trapezoid(inner, n_quad, kRtol, kNmax, 1e-16).value / kTwoPi;
}

double stokes_poloidal(const LevelGeometry& geo, double level, int n_quad) {
  const auto& sys = geo.system();
  const Vec2 e = geo.direction(0.0);
  const Loop tl = geo.toroidal_loop(level, 0.0);
  auto inner = [&](double phi) {
    const double s = geo.radius(level, phi, e);
    const Vec2 a = geo.axis().at(phi), da = geo.axis().derivative(phi);
    const Vec3 tan = tl.tangent(phi);
    const double ds = (Vec2(tan[0], tan[1]) - da).dot(e);
    return gauss_legendre(
        [&](double u) {
          const Point q{a[0] + u * s * e[0], a[1] + u * s * e[1], phi};
          const Vec3 w = sys.omega.rho(q) * sys.B(q);
          const Vec3 du(s * e[0], s * e[1], 0.0);
          const Vec3 dphi(da[0] + u * ds * e[0], da[1] + u * ds * e[1], 1.0);
          Mat3 M;
          M << w, du, dphi;
          return M.determinant();
        },
        0.0, 1.0);
  };
  return -periodic_trapezoid(inner, n_quad, kRtol, kNmax, 1e-16).value / kTwoPi;
}

const OneForm* potential_or_fallback(const LevelGeometry& geo, const FluxOptions& opt) {
  const auto& sys = geo.system();
  if (sys.alpha && !opt.force_fallback) return &*sys.alpha;
  if (!opt.allow_fallback)
    throw Error(ErrorCode::MissingPotentialAndFallbackDisabled, kModule,
                "no vector potential and the Stokes fallback is disabled");
  return nullptr;
}

}  // namespace

double toroidal_flux(const LevelGeometry& geo, double level, const FluxOptions& opt) {
  if (level == geo.p_axis()) return 0.0;
  const OneForm* alpha = potential_or_fallback(geo, opt);
  if (alpha) return loop_integral(*alpha, geo.poloidal_loop(level, 0.0), opt.n_quad).value;
  return stokes_toroidal(geo, level, opt.n_quad);
}

double poloidal_flux(const LevelGeometry& geo, double level, const FluxOptions& opt) {
  if (level == geo.p_axis()) {
    const OneForm* alpha = potential_or_fallback(geo, opt);
    if (!alpha) return 0.0;
    Loop axis_loop;
    axis_loop.homology = Loop::Homology::Toroidal;
    axis_loop.point = [&geo](double phi) {
      const Vec2 a = geo.axis().at(phi);
      return Point{a[0], a[1], phi};
    };
    axis_loop.tangent = [&geo](double phi) {
      const Vec2 d = geo.axis().derivative(phi);
      return Vec3(d[0], d[1], 1.0);
    };
    return -loop_integral(*alpha, axis_loop, opt.n_quad).value;
  }
  const OneForm* alpha = potential_or_fallback(geo, opt);
  if (alpha) return -loop_integral(*alpha, geo.toroidal_loop(level, 0.0), opt.n_quad).value;
  return stokes_poloidal(geo, level, opt.n_quad);
}

double toroidal_flux(const IntegrableSystem& sys, double level, const FluxOptions& opt) {
  return toroidal_flux(*make_level_geometry(sys), level, opt);
}

double poloidal_flux(const IntegrableSystem& sys, double level, const FluxOptions& opt) {
  return poloidal_flux(*make_level_geometry(sys), level, opt);
}

FluxDerivatives flux_level_derivatives(const LevelGeometry& geo, double level, int n_quad) {
  const auto& sys = geo.system();
  const TwoForm beta = flux_form(sys.B, sys.omega);
  FluxDerivatives d;
  auto fT = [&](double t) {
    const Point q = geo.poloidal_point(level, 0.0, t);
    return two_form_apply(beta(q), geo.level_normal(q, t), geo.poloidal_tangent(level, 0.0, t));
  };
  d.dpsiT = periodic_trapezoid(fT, n_quad, kRtol, kNmax, 1e-16).value / kTwoPi;
  const Loop tl = geo.toroidal_loop(level, 0.0);
  auto fP = [&](double phi) {
    const Point q = tl.point(phi);
    return two_form_apply(beta(q), geo.level_normal(q, 0.0), tl.tangent(phi));
  };
  d.dpsiP = -periodic_trapezoid(fP, n_quad, kRtol, kNmax, 1e-16).value / kTwoPi;
  return d;
}

FluxProfile flux_profile(const LevelGeometry& geo, const std::vector<double>& levels, const std::string& method,
                         const FluxOptions& opt, int threads) {
  if (levels.size() < 4) throw Error(ErrorCode::InvalidParameter, kModule, "flux_profile needs at least 4 levels");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1]))
      throw Error(ErrorCode::InvalidParameter, kModule, "levels must be strictly increasing");
  if (method != "spline" && method != "loop")
    throw Error(ErrorCode::InvalidParameter, kModule, "unknown derivative method '" + method + "'");
  const std::size_t n = levels.size();
  FluxProfile prof;
  prof.levels = levels;
  prof.method = method;
  prof.psiT.resize(n);
  prof.psiP.resize(n);
  prof.iota.resize(n);
  prof.dpsiT_dlevel.resize(n);
  std::vector<double> loop_iota(n);
  parallel_for(n, threads, [&](std::size_t i) {
    prof.psiT[i] = toroidal_flux(geo, levels[i], opt);
    prof.psiP[i] = poloidal_flux(geo, levels[i], opt);
    const FluxDerivatives d = flux_level_derivatives(geo, levels[i], opt.n_quad);
    prof.dpsiT_dlevel[i] = d.dpsiT;
    loop_iota[i] = d.dpsiP / d.dpsiT;
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return prof.psiT[a] < prof.psiT[b]; });
  const bool increasing = std::is_sorted(prof.psiT.begin(), prof.psiT.end());
  const bool decreasing = std::is_sorted(prof.psiT.rbegin(), prof.psiT.rend());
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = prof.psiT[order[k]];
    y[k] = prof.psiP[order[k]];
  }
  for (std::size_t k = 1; k < n; ++k)
    if (!(x[k] > x[k - 1]) || !(increasing || decreasing))
      throw Error(ErrorCode::NonMonotoneFlux, kModule, "toroidal flux is not strictly monotone in the level");
  if (method == "loop") {
    prof.iota = loop_iota;
  } else {
    const Spline1D sp(x, y);
    for (std::size_t i = 0; i < n; ++i) prof.iota[i] = sp.derivative(prof.psiT[i]);
  }
  return prof;
}

FluxProfile flux_profile(const IntegrableSystem& sys, const std::vector<double>& levels, const std::string& method,
                         const FluxOptions& opt, int threads) {
  return flux_profile(*make_level_geometry(sys), levels, method, opt, threads);
}

double level_for_flux(const LevelGeometry& geo, double psi, const FluxOptions& opt) {
  if (psi == 0.0) return geo.p_axis();
  const Vec2 a = geo.axis().at(0.0);
  const double tr = geo.system().p.hess(Point{a[0], a[1], 0.0}).topLeftCorner<2, 2>().trace();
  double level = geo.p_axis() + (tr > 0 ? 1e-8 : -1e-8);
  level = geo.p_axis() + psi / flux_level_derivatives(geo, level, opt.n_quad).dpsiT;
  for (int it = 0; it < 50; ++it) {
    const double f = toroidal_flux(geo, level, opt) - psi;
    const double df = flux_level_derivatives(geo, level, opt.n_quad).dpsiT;
    const double step = f / df;
    level -= step;
    if (std::abs(step) <= 1e-15 * (std::abs(level) + std::abs(psi / df))) return level;
  }
  throw Error(ErrorCode::NewtonDivergence, kModule, "level_for_flux did not converge", "psi=" + std::to_string(psi));
}

}  // namespace ifield
