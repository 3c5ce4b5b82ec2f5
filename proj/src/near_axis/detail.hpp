#pragma once

#include <functional>
#include <vector>

#include "ifield/near_axis.hpp"

namespace ifield::near_axis_detail {

inline constexpr const char* kModule = "near_axis";

// Polar basis at (r, t): vectors d/dr, d/dt, d/dphi and the covectors dr, dt.
struct PolarFrame {
  Vec3 e_r, e_t, e_phi;
  Vec3 dr, dt;
  // N with dpsi(N) = 1, psi = r^2 / 2
  Vec3 normal() const { return e_r / r; }
  double r = 0.0;
};

inline PolarFrame polar_frame(double r, double t) {
  const double c = std::cos(t), s = std::sin(t), re = std::max(r, 1e-12);
  PolarFrame f;
  f.r = re;
  f.e_r = Vec3(c, -s, 0.0);
  f.e_t = Vec3(-r * s, -r * c, 0.0);
  f.e_phi = Vec3(0.0, 0.0, 1.0);
  f.dr = Vec3(c, -s, 0.0);
  f.dt = Vec3(-s / re, -c / re, 0.0);
  return f;
}

// Torus radii r_k = r_w (k + 1/2) / (n - 1/2); the outermost sits on r_w.
std::vector<double> torus_radii(double r_w, int n);

// Per-torus angular rate of a lambda flow on the torus with index k.
using TorusRate = std::function<void(int k, double lambda, double t, double phi, double& dt, double& dphi)>;

struct FlowTable {
  PolarTable table;  // D_t, D_phi with old = new + D
  double max_displacement = 0.0;
};

// Integrates every grid point of every torus from lambda = 1 back to 0.
FlowTable tabulate_flow(const std::vector<double>& radii, int n_theta, int n_phi, const TorusRate& rate,
                        const NearAxisOptions& opt);

// B, J and the volume density of sys transported to a chart point with one frame evaluation.
struct ChartSample {
  Vec3 B, J;
  double rho = 0.0;
  Vec3 beta() const { return two_form_from_dual(rho * B); }
  Vec3 j() const { return two_form_from_dual(rho * J); }
};
ChartSample sample_chart(const IntegrableSystem& sys, const Diffeo& map, const Point& q);

// Pruning threshold for Fourier coefficients of grid data: round-off of its largest value.
double prune_level(const std::vector<double>& a, const std::vector<double>& b = {});

// Scalar field and gradient from a one-field polar table in chart coordinates.
ScalarField table_field(std::shared_ptr<const PolarTable> table, int field = 0);

// Max angular std (optionally relative to |mean|) of f over polar rings of the grid.
double ring_std(const std::vector<Point>& grid, const std::vector<double>& values, int ring_size, bool relative);

}  // namespace ifield::near_axis_detail
