#include "detail.hpp"

#include <cmath>

namespace ifield::near_axis_detail {

std::vector<double> torus_radii(double r_w, int n) {
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) r[k] = r_w * (k + 0.5) / (n - 0.5);
  return r;
}

FlowTable tabulate_flow(const std::vector<double>& radii, int n_theta, int n_phi, const TorusRate& rate,
                        const NearAxisOptions& opt) {
  const int nr = static_cast<int>(radii.size());
  const int npt = n_theta * n_phi;
  std::vector<std::vector<std::vector<double>>> D(2, std::vector<std::vector<double>>(nr, std::vector<double>(npt)));
  std::vector<double> dmax(static_cast<std::size_t>(nr), 0.0);
  OdeOptions ode;
  ode.abs_tol = ode.rel_tol = opt.ode_tol;
  ode.h_init = -1.0 / 16.0;
  // at least 16 substeps in lambda
  std::vector<double> outs;
  for (int s = 15; s >= 0; --s) outs.push_back(s / 16.0);
  parallel_for(static_cast<std::size_t>(nr), opt.threads, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    for (int i = 0; i < n_theta; ++i)
      for (int j = 0; j < n_phi; ++j) {
        const double t0 = kTwoPi * i / n_theta, p0 = kTwoPi * j / n_phi;
        State<2> y{t0, p0};
        integrate_outputs<2>(
            [&](double lam, const State<2>& s, State<2>& ds) { rate(k, lam, s[0], s[1], ds[0], ds[1]); }, y, 1.0,
            outs, ode, [](double, const State<2>&) {});
        const int idx = i * n_phi + j;
        D[0][k][idx] = y[0] - t0;
        D[1][k][idx] = y[1] - p0;
        dmax[kk] = std::max(dmax[kk], std::hypot(radii[kk] * D[0][k][idx], D[1][k][idx]));
      }
  });
  FlowTable out{PolarTable(radii, n_theta, n_phi, D), 0.0};
  for (double d : dmax) out.max_displacement = std::max(out.max_displacement, d);
  return out;
}

ChartSample sample_chart(const IntegrableSystem& sys, const Diffeo& map, const Point& q) {
  const LocalFrame f = map.at_new(q);
  ChartSample s;
  s.B = push_vector(f, sys.B(f.old_point));
  s.J = push_vector(f, sys.J(f.old_point));
  s.rho = sys.omega.rho(f.old_point) * f.d_inverse.determinant();
  return s;
}

double prune_level(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  for (double v : b) m = std::max(m, std::abs(v));
  return 1e-15 * m;
}

ScalarField table_field(std::shared_ptr<const PolarTable> table, int field) {
  ScalarField f;
  f.value = [table, field](const Point& q) {
    double r, t;
    polar_coords(q, r, t);
    return table->eval(field, r, t, q.phi).v;
  };
  f.gradient = [table, field](const Point& q) -> Vec3 {
    double r, t;
    polar_coords(q, r, t);
    const auto s = table->eval(field, r, t, q.phi);
    const PolarFrame pf = polar_frame(r, t);
    return s.dr * pf.dr + s.dt * pf.dt + Vec3(0.0, 0.0, s.dphi);
  };
  return f;
}

double ring_std(const std::vector<Point>& grid, const std::vector<double>& values, int ring_size, bool relative) {
  double worst = 0.0;
  for (std::size_t start = 0; start + ring_size <= grid.size(); start += ring_size) {
    double m = 0.0, m2 = 0.0;
    for (int k = 0; k < ring_size; ++k) m += values[start + k];
    m /= ring_size;
    for (int k = 0; k < ring_size; ++k) m2 += (values[start + k] - m) * (values[start + k] - m);
    double s = std::sqrt(m2 / ring_size);
    if (relative) s /= std::max(std::abs(m), 1e-300);
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace ifield::near_axis_detail
