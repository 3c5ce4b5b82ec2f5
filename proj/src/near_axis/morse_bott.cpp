#include <cmath>

#include "ifield/near_axis.hpp"

namespace ifield {

namespace {

constexpr const char* kModule = "near_axis";

Mat2 rot90() {
  Mat2 J;
  J << 0.0, -1.0, 1.0, 0.0;
  return J;
}

// (X, Y) -> (X, Y) sqrt(2 Psi_T(p) / |W|^2): psi becomes |w|^2 / 2.
class RescaleMap : public Diffeo {
 public:
  RescaleMap(ScalarField p, std::shared_ptr<const FluxFunctions> f) : p_(std::move(p)), f_(std::move(f)) {
    s0_ = std::sqrt(f_->c * f_->q.eval(0.0, 0)[0]);
  }

  Point forward(const Point& x) const override {
    const double n2 = x.x * x.x + x.y * x.y;
    if (n2 < 1e-24) return {s0_ * x.x, s0_ * x.y, x.phi};
    const double s = std::sqrt(2.0 * f_->psi_of_p(p_(x)) / n2);
    return {s * x.x, s * x.y, x.phi};
  }

  Point inverse(const Point& y) const override {
    const double R = std::hypot(y.x, y.y);
    if (R < 1e-12) return {y.x / s0_, y.y / s0_, y.phi};
    const Vec2 e(y.x / R, y.y / R);
    const double target = 0.5 * R * R;
    double s = R / s0_;
    for (int it = 0; it < 60; ++it) {
      const Point q{s * e[0], s * e[1], y.phi};
      const double pv = p_(q);
      const Vec3 g = p_.grad(q);
      const double f = f_->psi_of_p(pv) - target;
      const double df = f_->dpsi_dp(pv) * (g[0] * e[0] + g[1] * e[1]);
      const double ds = f / df;
      s -= ds;
      if (std::abs(ds) <= 1e-15 * (1.0 + s)) return {s * e[0], s * e[1], y.phi};
    }
    throw Error(ErrorCode::NewtonDivergence, kModule, "flux rescaling inversion did not converge",
                "r=" + std::to_string(R));
  }

  Mat3 jacobian(const Point& x) const override {
    const double n2 = x.x * x.x + x.y * x.y;
    Mat3 J = Mat3::Identity();
    if (n2 < 1e-24) {
      J(0, 0) = J(1, 1) = s0_;
      return J;
    }
    const double pv = p_(x);
    const Vec3 g = p_.grad(x);
    const double psi = f_->psi_of_p(pv), dpsi = f_->dpsi_dp(pv);
    const double kappa = 2.0 * psi / n2;
    const double s = std::sqrt(kappa);
    const Vec2 w(x.x, x.y);
    Vec3 dk;
    dk.head<2>() = 2.0 * dpsi * g.head<2>() / n2 - 4.0 * psi * w / (n2 * n2);
    dk[2] = 2.0 * dpsi * g[2] / n2;
    const Vec3 ds = dk / (2.0 * s);
    J.topLeftCorner<2, 2>() = s * Mat2::Identity() + w * ds.head<2>().transpose();
    J.block<2, 1>(0, 2) = w * ds[2];
    return J;
  }

  std::string describe() const override { return "flux_rescale"; }

 private:
  ScalarField p_;
  std::shared_ptr<const FluxFunctions> f_;
  double s0_ = 1.0;
};

}  // namespace

// ---------------------------------------------------------------------------

MBChart morse_bott_normalize(const IntegrableSystem& sys, const AxisReport& report, const NearAxisOptions& opt) {
  const ClosedOrbit& ax = report.orbit;
  const bool elliptic = report.kind == AxisKind::Elliptic;
  const TwoForm beta = flux_form(sys.B, sys.omega);
  const int n = std::max(16, opt.n_axis);
  const int ns = elliptic ? n : 2 * n;  // hyperbolic frames are followed over two turns
  std::vector<Mat2> Ls(ns);
  std::vector<double> cs(ns);
  Vec2 v_prev = Vec2::Zero();
  for (int s = 0; s < ns; ++s) {
    const double phi = kTwoPi * s / n;
    const Vec2 a = ax.at(phi);
    const Point q{a[0], a[1], phi};
    const Mat2 H = sys.p.hess(q).topLeftCorner<2, 2>();
    const double b = beta(q)[0];
    const double det = H.determinant();
    if (!(std::abs(det) > 1e-14 * std::max(1.0, H.squaredNorm())) || std::abs(b) < 1e-14)
      throw Error(ErrorCode::DegenerateAxis, kModule, "transverse Hessian of p is degenerate on the axis",
                  "phi=" + std::to_string(phi) + " det=" + std::to_string(det));
    if ((det > 0.0) != elliptic)
      throw Error(ErrorCode::InconsistentClassification, kModule,
                  "Hessian signature disagrees with the monodromy classification", to_string(report.kind));
    Eigen::SelfAdjointEigenSolver<Mat2> es(H);
    const Vec2 lam = es.eigenvalues();
    const Mat2 V = es.eigenvectors();
    if (elliptic) {
      const double c = (H.trace() > 0.0 ? 1.0 : -1.0) * std::sqrt(det) / std::abs(b);
      const Vec2 d(std::sqrt(lam[0] / c), std::sqrt(lam[1] / c));
      Mat2 S = Mat2::Identity();
      if (b < 0.0) S(1, 1) = -1.0;
      Ls[s] = S * V * d.asDiagonal() * V.transpose();
      cs[s] = c;
    } else {
      const double c = std::sqrt(-det) / std::abs(b);
      Vec2 vp = V.col(1);  // positive eigenvalue
      if (s > 0) {
        const double dot = vp.dot(v_prev);
        if (std::abs(dot) < 0.5)
          throw Error(ErrorCode::EigenframeDiscontinuity, kModule, "Hessian eigenframe turns too fast to follow",
                      "phi=" + std::to_string(phi));
        if (dot < 0.0) vp = -vp;
      }
      v_prev = vp;
      const Vec2 vm = (b > 0.0 ? 1.0 : -1.0) * (rot90() * vp);
      Mat2 Vt;
      Vt.row(0) = vp.transpose() * std::sqrt(lam[1] / c);
      Vt.row(1) = vm.transpose() * std::sqrt(-lam[0] / c);
      Ls[s] = Vt;
      cs[s] = c;
    }
  }
  MBChart mb;
  mb.axis = report;
  mb.kind = report.kind;
  mb.eps = elliptic ? 1 : -1;
  mb.p_axis = report.p_axis;
  int used = n;
  if (!elliptic) {
    const double hol = Ls[n].row(0).dot(Ls[0].row(0)) / (Ls[0].row(0).squaredNorm());
    if (std::abs(std::abs(hol) - 1.0) > 1e-3)
      throw Error(ErrorCode::EigenframeDiscontinuity, kModule, "eigenframe holonomy is neither +1 nor -1",
                  "holonomy=" + std::to_string(hol));
    mb.deck_flip = hol < 0.0;
    if (mb.deck_flip != (report.kind == AxisKind::ReflectionHyperbolic))
      throw Error(ErrorCode::EigenframeDiscontinuity, kModule,
                  "eigenframe holonomy disagrees with the monodromy classification", to_string(report.kind));
    if (mb.deck_flip) used = 2 * n;
  }
  mb.cover_period = kTwoPi * used / n;
  double cmin = cs[0], cmax = cs[0], csum = 0.0;
  std::vector<Eigen::VectorXd> samples(used);
  for (int s = 0; s < used; ++s) {
    cmin = std::min(cmin, cs[s]);
    cmax = std::max(cmax, cs[s]);
    csum += cs[s];
    Eigen::VectorXd v(4);
    v << Ls[s](0, 0), Ls[s](0, 1), Ls[s](1, 0), Ls[s](1, 1);
    samples[s] = v;
  }
  mb.c = csum / used;
  mb.c_spread = (cmax - cmin) / std::abs(mb.c);
  const PeriodicSeries L(samples, mb.cover_period);
  const ClosedOrbit axis = ax;
  mb.map = std::make_shared<AffinePhiMap>(
      [L, axis](double phi) {
        const Eigen::VectorXd l = L.eval(phi, 0), dl = L.eval(phi, 1);
        Mat2 M, dM;
        M << l[0], l[1], l[2], l[3];
        dM << dl[0], dl[1], dl[2], dl[3];
        const Vec2 a = axis.at(phi), da = axis.derivative(phi);
        return AffinePhiMap::Data{M, dM, -M * a, -dM * a - M * da};
      },
      "morse_bott");

  const TwoForm pb = pull_back(beta, mb.map);
  for (int s = 0; s < 32; ++s) {
    const Vec3 b = pb(Point{0.0, 0.0, kTwoPi * s / 32});
    mb.beta_axis_residual = std::max(mb.beta_axis_residual, (b - Vec3(1.0, 0.0, 0.0)).cwiseAbs().maxCoeff());
  }
  const double rq = opt.quadratic_radius;
  mb.quadratic_radius = rq;
  for (int s = 0; s < 8; ++s)
    for (int k = 0; k < 16; ++k) {
      const double phi = kTwoPi * s / 8, a = kTwoPi * k / 16;
      const double X = rq * std::cos(a), Y = rq * std::sin(a);
      const double pv = sys.p(mb.map->inverse(Point{X, Y, phi}));
      const double d = pv - mb.p_axis - 0.5 * mb.c * (X * X + mb.eps * Y * Y);
      mb.quadratic_residual = std::max(mb.quadratic_residual, std::abs(d) / (0.5 * std::abs(mb.c) * rq * rq));
    }
  return mb;
}

// ---------------------------------------------------------------------------

double FluxFunctions::psi_of_p(double p) const {
  const double dp = p - p_axis;
  const double rho = std::sqrt(std::max(2.0 * dp / c, 0.0));
  return dp * q.eval(rho, 0)[0];
}

double FluxFunctions::dpsi_dp(double p) const {
  const double dp = p - p_axis;
  const double rho = std::sqrt(std::max(2.0 * dp / c, 0.0));
  Eigen::VectorXd v, d;
  q.eval_both(rho, v, d);
  return v[0] + 0.5 * rho * d[0];
}

FluxChart flux_coordinates(const IntegrableSystem& sys, const MBChart& mb, const NearAxisOptions& opt) {
  if (mb.eps != 1)
    throw Error(ErrorCode::HyperbolicUnsupported, kModule, "flux coordinates need an elliptic axis",
                to_string(mb.kind));
  const LevelGeometry geo(sys, mb.axis.orbit, mb.axis.orientation);
  const int n = std::max(8, opt.n_flux);
  const double rho_max = 1.25 * opt.r_max;
  const double h = rho_max / (n - 0.5);
  std::vector<double> rho(n), qv(n), rt(n), ratio(n), dpdpsi(n), iota(n), psip(n);
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    rho[k] = (k + 0.5) * h;
    const double dp = 0.5 * mb.c * rho[k] * rho[k];
    const double level = mb.p_axis + dp;
    const double psi = toroidal_flux(geo, level);
    if (!(psi > prev))
      throw Error(ErrorCode::NonMonotoneFlux, kModule, "toroidal flux is not increasing away from the axis",
                  "level=" + std::to_string(level) + " psi=" + std::to_string(psi));
    prev = psi;
    const FluxDerivatives d = flux_level_derivatives(geo, level);
    qv[k] = psi / dp;
    rt[k] = std::sqrt(2.0 * psi);
    ratio[k] = dp / psi;
    dpdpsi[k] = 1.0 / d.dpsiT;
    iota[k] = d.dpsiP / d.dpsiT;
    psip[k] = poloidal_flux(geo, level);
  }
  auto f = std::make_shared<FluxFunctions>();
  f->p_axis = mb.p_axis;
  f->c = mb.c;
  Eigen::MatrixXd qm(n, 1);
  for (int k = 0; k < n; ++k) qm(k, 0) = qv[k];
  f->q = mirrored_spline(rho, qm, {1});
  f->p_ratio = EvenProfile(rt, ratio);
  f->dp_dpsi = EvenProfile(rt, dpdpsi);
  f->iota = EvenProfile(rt, iota);
  f->psi_p = EvenProfile(rt, psip);
  f->psi_max = 0.5 * rt.back() * rt.back();

  FluxChart fc;
  fc.mb = mb;
  fc.f = f;
  fc.r_max = rt.back();
  const IntegrableSystem mbsys = pushforward(sys, mb.map);
  const DiffeoPtr rescale = std::make_shared<RescaleMap>(mbsys.p, f);
  fc.map = compose({mb.map, rescale});
  fc.system = pushforward(sys, fc.map);
  fc.beta = pull_back(flux_form(sys.B, sys.omega), fc.map);
  for (int s = 0; s < 32; ++s) {
    const Vec3 b = fc.beta(Point{0.0, 0.0, kTwoPi * s / 32});
    fc.beta_axis_residual = std::max(fc.beta_axis_residual, (b - Vec3(1.0, 0.0, 0.0)).cwiseAbs().maxCoeff());
  }
  return fc;
}

OneForm alpha_star(const FluxChart& chart) {
  OneForm a;
  auto f = chart.f;
  a.eval = [f](const Point& q) -> Vec3 {
    const double psi = 0.5 * (q.x * q.x + q.y * q.y);
    return Vec3(0.5 * q.y, -0.5 * q.x, -f->psi_p(psi));
  };
  return a;
}

Vec3 beta_star(double iota, const Point& q) { return {1.0, -iota * q.x, -iota * q.y}; }

std::vector<Point> verification_grid(double r_verify, int n_r, int n_theta, int n_phi) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n_r) * n_theta * n_phi);
  for (int i = 1; i <= n_r; ++i)
    for (int a = 0; a < n_theta; ++a)
      for (int j = 0; j < n_phi; ++j)
        pts.push_back(polar_point(r_verify * i / n_r, kTwoPi * a / n_theta, kTwoPi * j / n_phi));
  return pts;
}

}  // namespace ifield
