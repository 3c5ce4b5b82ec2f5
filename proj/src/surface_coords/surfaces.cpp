#include <cmath>

#include "ifield/surface_coords.hpp"

namespace ifield {

namespace {

constexpr const char* kModule = "surface_coords";

}  // namespace

Point SurfaceChart::at(double theta, double zeta) const {
  return {embedding[0].value(theta, zeta), embedding[1].value(theta, zeta),
          winding[0] * theta + winding[1] * zeta + embedding[2].value(theta, zeta)};
}

void SurfaceChart::tangents(double theta, double zeta, Vec3& x_theta, Vec3& x_zeta) const {
  const auto ex = embedding[0].eval(theta, zeta);
  const auto ey = embedding[1].eval(theta, zeta);
  const auto ep = embedding[2].eval(theta, zeta);
  x_theta = Vec3(ex[1], ey[1], winding[0] + ep[1]);
  x_zeta = Vec3(ex[2], ey[2], winding[1] + ep[2]);
}

void SurfaceChart::grid_tangents(std::vector<Vec3>& x_theta, std::vector<Vec3>& x_zeta) const {
  std::array<std::vector<double>, 3> dt, dz;
  for (int c = 0; c < 3; ++c) {
    dt[c] = embedding[c].d_theta().to_grid();
    dz[c] = embedding[c].d_phi().to_grid();
  }
  x_theta.resize(grid.size());
  x_zeta.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    x_theta[k] = Vec3(dt[0][k], dt[1][k], winding[0] + dt[2][k]);
    x_zeta[k] = Vec3(dz[0][k], dz[1][k], winding[1] + dz[2][k]);
  }
}

SurfaceChart make_chart(double level, double psi, std::vector<Point> grid, int n_theta, int n_zeta,
                        std::array<int, 2> winding) {
  if (static_cast<int>(grid.size()) != n_theta * n_zeta)
    throw Error(ErrorCode::InvalidParameter, kModule, "chart grid size does not match its resolution");
  SurfaceChart c;
  c.level = level;
  c.psi = psi;
  c.n_theta = n_theta;
  c.n_zeta = n_zeta;
  c.winding = winding;
  const std::size_t n = grid.size();
  std::vector<double> xs(n), ys(n), ps(n);
  double ref = 0.0;
  for (int i = 0; i < n_theta; ++i)
    for (int j = 0; j < n_zeta; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * n_zeta + j;
      xs[k] = grid[k].x;
      ys[k] = grid[k].y;
      const double per = grid[k].phi - winding[0] * c.theta(i) - winding[1] * c.zeta(j);
      if (k == 0) ref = per - kTwoPi * std::round(per / kTwoPi);
      ps[k] = unwrap_near(per, ref);
      grid[k].phi = ps[k] + winding[0] * c.theta(i) + winding[1] * c.zeta(j);
    }
  c.embedding[0] = TorusSeries::from_grid(xs, n_theta, n_zeta);
  c.embedding[1] = TorusSeries::from_grid(ys, n_theta, n_zeta);
  c.embedding[2] = TorusSeries::from_grid(ps, n_theta, n_zeta);
  c.grid = std::move(grid);
  return c;
}

double resonance_distance(double iota, int m_max, int n_max) {
  double best = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= m_max; ++m) {
    const double n = std::round(m * iota);
    if (std::abs(n) <= n_max) best = std::min(best, std::abs(m * iota - n));
  }
  return best;
}

namespace {

std::vector<Point> contour_grid(const LevelGeometry& geo, double level, int nt, int nz) {
  std::vector<Point> grid(static_cast<std::size_t>(nt) * nz);
  for (int j = 0; j < nz; ++j) {
    const double phi = kTwoPi * j / nz;
    double s_prev = -1.0;
    for (int i = 0; i < nt; ++i) {
      const double t = kTwoPi * i / nt;
      const Vec2 e = geo.direction(t);
      const double s = geo.radius(level, phi, e, s_prev);
      const Vec2 a = geo.axis().at(phi);
      grid[static_cast<std::size_t>(i) * nz + j] = Point{a[0] + s * e[0], a[1] + s * e[1], phi};
      s_prev = s;
    }
  }
  return grid;
}

std::vector<Point> fieldline_grid(const LevelGeometry& geo, double level, const SurfaceOptions& opt,
                                  double& fit_rms) {
  const int nt = opt.n_theta, nz = opt.n_zeta;
  const FluxDerivatives d = flux_level_derivatives(geo, level);
  const double iota = d.dpsiP / d.dpsiT;
  const int m_max = nt / 2, n_max = nz / 2;
  const double dist = resonance_distance(iota, m_max, n_max);
  if (dist < opt.resonance_guard)
    throw Error(ErrorCode::ResonantSurface, kModule, "rotational transform is near a low-order rational",
                "iota=" + std::to_string(iota) + " distance=" + std::to_string(dist));
  const int T = opt.transits > 0 ? opt.transits : 4 * nt;
  const int M = nt / 2 - 1;
  if (T < 2 * M + 1) throw Error(ErrorCode::InvalidParameter, kModule, "too few transits for the section fit");
  const Point seed = geo.poloidal_point(level, 0.0, 0.0);
  const Trace tr = trace(geo.system().B, seed, kTwoPi * T, T * nz, opt.trace);
  const int o = geo.orientation();
  std::vector<Point> grid(static_cast<std::size_t>(nt) * nz);
  fit_rms = 0.0;
  for (int j = 0; j < nz; ++j) {
    const double phi = kTwoPi * j / nz;
    const Vec2 a = geo.axis().at(phi);
    Eigen::MatrixXd A(T, 2 * M + 1);
    Eigen::VectorXd s(T);
    for (int k = 0; k < T; ++k) {
      const Point& q = tr.points[static_cast<std::size_t>(k) * nz + j];
      const Vec2 dq(q.x - a[0], q.y - a[1]);
      const double t = std::atan2(o * dq[1], dq[0]);
      s[k] = dq.norm();
      A(k, 0) = 1.0;
      for (int m = 1; m <= M; ++m) {
        A(k, 2 * m - 1) = std::cos(m * t);
        A(k, 2 * m) = std::sin(m * t);
      }
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(s);
    fit_rms = std::max(fit_rms, std::sqrt((A * c - s).squaredNorm() / T));
    for (int i = 0; i < nt; ++i) {
      const double t = kTwoPi * i / nt;
      double r = c[0];
      for (int m = 1; m <= M; ++m) r += c[2 * m - 1] * std::cos(m * t) + c[2 * m] * std::sin(m * t);
      const Vec2 e = geo.direction(t);
      grid[static_cast<std::size_t>(i) * nz + j] = Point{a[0] + r * e[0], a[1] + r * e[1], phi};
    }
  }
  return grid;
}

}  // namespace

SurfaceChart build_surface(const LevelGeometry& geo, double level, const SurfaceOptions& opt) {
  if (opt.n_theta < 8 || opt.n_zeta < 4)
    throw Error(ErrorCode::InvalidParameter, kModule, "surface resolution too small");
  double fit_rms = 0.0;
  std::vector<Point> grid = opt.method == SurfaceOptions::Method::Contour
                                ? contour_grid(geo, level, opt.n_theta, opt.n_zeta)
                                : fieldline_grid(geo, level, opt, fit_rms);
  double pv = 0.0;
  for (const auto& q : grid) pv = std::max(pv, std::abs(geo.system().p(q) - level));
  if (opt.method == SurfaceOptions::Method::FieldLine && fit_rms > opt.fit_tol)
    throw Error(ErrorCode::SurfaceFitResidualTooLarge, kModule, "field-line section fit residual too large",
                "rms=" + std::to_string(fit_rms));
  if (pv > opt.p_tol)
    throw Error(ErrorCode::SurfaceFitResidualTooLarge, kModule, "p varies over the constructed surface",
                "max|p-level|=" + std::to_string(pv));
  SurfaceChart c = make_chart(level, toroidal_flux(geo, level), std::move(grid), opt.n_theta, opt.n_zeta);
  c.p_variation = pv;
  c.fit_residual = fit_rms;
  return c;
}

SurfaceChart build_surface(const IntegrableSystem& sys, double level, const SurfaceOptions& opt) {
  return build_surface(*make_level_geometry(sys), level, opt);
}

}  // namespace ifield
