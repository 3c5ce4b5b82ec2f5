#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ifield/core.hpp"

namespace ifield {

// ---------------------------------------------------------------------------
// Adaptive Runge-Kutta (Dormand-Prince 5(4)) with exact landing on output
// times. Thin driver over boost::odeint's controlled stepper so that accepted
// and rejected steps can be counted.

template <std::size_t N>
using State = std::array<double, N>;

struct OdeOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double h_init = 1e-2;
  long max_steps = 2000000;
};

struct OdeStats {
  long steps = 0;
  long rejected = 0;
};

// Integrates y' = f(t, y, dy) from t0 through the monotone list `outs`,
// calling obs(t, y) at each output time. Returns step counters.
template <std::size_t N, class Rhs, class Obs>
OdeStats integrate_outputs(Rhs&& f, State<N>& y, double t0, const std::vector<double>& outs,
                           const OdeOptions& opt, Obs&& obs) {
  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_dopri5<State<N>>;
  auto ctrl = odeint::make_controlled(opt.abs_tol, opt.rel_tol, Stepper());
  auto sys = [&](const State<N>& x, State<N>& dx, double t) { f(t, x, dx); };
  OdeStats stats;
  double t = t0;
  double dir = 1.0;
  if (!outs.empty() && outs.back() < t0) dir = -1.0;
  double dt = dir * std::abs(opt.h_init);
  for (double target : outs) {
    while (dir * (target - t) > 0.0) {
      const double remaining = target - t;
      bool clipped = false;
      double saved = dt;
      if (std::abs(dt) >= std::abs(remaining)) {
        dt = remaining;
        clipped = true;
      }
      const double t_before = t;
      auto res = ctrl.try_step(sys, y, t, dt);
      if (res == odeint::success) {
        ++stats.steps;
        if (clipped) {
          t = target;
          if (std::abs(saved) > std::abs(dt)) dt = saved;
        }
      } else {
        ++stats.rejected;
        (void)t_before;
      }
      if (stats.steps + stats.rejected > opt.max_steps)
        throw Error(ErrorCode::DomainExit, "numerics", "step budget exhausted in ODE integration");
      if (std::abs(dt) < 1e-14 * (1.0 + std::abs(t)))
        throw Error(ErrorCode::DomainExit, "numerics", "step size underflow in ODE integration");
    }
    obs(t, static_cast<const State<N>&>(y));
  }
  return stats;
}

template <std::size_t N, class Rhs>
OdeStats integrate_to(Rhs&& f, State<N>& y, double t0, double t1, const OdeOptions& opt) {
  return integrate_outputs<N>(std::forward<Rhs>(f), y, t0, std::vector<double>{t1}, opt,
                              [](double, const State<N>&) {});
}

// ---------------------------------------------------------------------------
// 1-D periodic trigonometric interpolation of vector samples.

class PeriodicSeries {
 public:
  PeriodicSeries() = default;
  // samples[i] is the value at t = i * period / samples.size().
  PeriodicSeries(const std::vector<Eigen::VectorXd>& samples, double period);

  Eigen::VectorXd value(double t) const { return eval(t, 0); }
  // Derivative of order `order` (0, 1, 2).
  Eigen::VectorXd eval(double t, int order) const;

  int size() const { return n_; }
  int dim() const { return dim_; }
  double period() const { return period_; }
  bool empty() const { return n_ == 0; }
  // Largest absolute coefficient among the highest retained quarter of modes.
  double tail_magnitude() const;

 private:
  int n_ = 0;
  int dim_ = 0;
  double period_ = kTwoPi;
  Eigen::VectorXd a0_;
  std::vector<Eigen::VectorXd> a_, b_;  // k = 1..n/2
};

// ---------------------------------------------------------------------------
// Scalar Fourier series on the 2-torus (theta, phi), both 2*pi periodic.

class TorusSeries {
 public:
  struct Mode {
    int m;
    int n;
    std::complex<double> c;
  };

  TorusSeries() = default;
  // grid[i * n_phi + j] = f(2*pi*i/n_theta, 2*pi*j/n_phi).
  static TorusSeries from_grid(const std::vector<double>& grid, int n_theta, int n_phi,
                               double prune = 0.0);
  static TorusSeries from_modes(std::vector<Mode> modes, int n_theta, int n_phi);

  double value(double theta, double phi) const;
  // value, d/dtheta, d/dphi
  std::array<double, 3> eval(double theta, double phi) const;

  // Derivative series.
  TorusSeries d_theta() const;
  TorusSeries d_phi() const;
  // Values on the native grid.
  std::vector<double> to_grid() const;

  std::complex<double> coefficient(int m, int n) const;
  double mean() const { return coefficient(0, 0).real(); }
  const std::vector<Mode>& modes() const { return modes_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  double spectral_tail() const;

 private:
  std::vector<Mode> modes_;
  int n_theta_ = 0;
  int n_phi_ = 0;
};

// Integrate a closed one-form given by its (theta, phi) components on a torus
// grid. Returns f with zero mean such that df = a - (mean periods); also
// reports the periods and the exactness mismatch of the mixed modes.
struct TorusPrimitive {
  TorusSeries f;
  double period_theta = 0.0;  // mean of a_theta
  double period_phi = 0.0;    // mean of a_phi
  double closedness_residual = 0.0;
};

TorusPrimitive integrate_closed_form(const std::vector<double>& a_theta,
                                     const std::vector<double>& a_phi, int n_theta, int n_phi,
                                     double prune = 0.0);

// Spectral derivatives of grid data on the torus.
void torus_gradient(const std::vector<double>& grid, int n_theta, int n_phi,
                    std::vector<double>& d_theta, std::vector<double>& d_phi);

// ---------------------------------------------------------------------------
// Interpolating cubic B-spline (knot averaging) with shared basis across many
// value columns. Nodes need not be uniform; cubics are reproduced exactly.

class VectorSpline {
 public:
  VectorSpline() = default;
  VectorSpline(const std::vector<double>& nodes, const Eigen::MatrixXd& values);

  // Values (order 0) or first derivative (order 1) of all columns.
  Eigen::VectorXd eval(double x, int order = 0) const;
  void eval_both(double x, Eigen::VectorXd& value, Eigen::VectorXd& deriv) const;
  double x_min() const { return x0_; }
  double x_max() const { return x1_; }
  bool empty() const { return ctrl_.size() == 0; }
  int dim() const { return static_cast<int>(ctrl_.cols()); }

 private:
  double x0_ = 0.0, x1_ = 1.0;
  Eigen::Array<double, 1, Eigen::Dynamic> knots_;
  Eigen::MatrixXd ctrl_;
};

// Scalar convenience wrapper.
class Spline1D {
 public:
  Spline1D() = default;
  Spline1D(const std::vector<double>& nodes, const std::vector<double>& values);
  double operator()(double x) const { return s_.eval(x, 0)[0]; }
  double derivative(double x) const { return s_.eval(x, 1)[0]; }
  bool empty() const { return s_.empty(); }
  double x_min() const { return s_.x_min(); }
  double x_max() const { return s_.x_max(); }

 private:
  VectorSpline s_;
};

// Even extension: nodes r_k > 0 and values f(r_k); builds a spline on
// [-r_max, r_max] with f(-r) = f(r) (parity +1) or -f(r) (parity -1).
VectorSpline mirrored_spline(const std::vector<double>& r_nodes, const Eigen::MatrixXd& values,
                             const std::vector<int>& parity);

// ---------------------------------------------------------------------------
// Quadrature.

struct QuadratureResult {
  double value = 0.0;
  int n = 0;
  bool converged = false;
};

// Trapezoid rule for a 2*pi periodic integrand with doubling until the
// relative change is below rtol.
QuadratureResult periodic_trapezoid(const std::function<double(double)>& f, int n_start,
                                    double rtol, int n_max, double atol = 1e-15);

// 24-point Gauss-Legendre on [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a, double b);

// ---------------------------------------------------------------------------
// Parallel loop over [0, n) using up to `threads` worker threads. Each index
// is processed exactly once; fn must be thread-safe for distinct indices.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Angle unwrapping helper.
double unwrap_near(double angle, double reference);

}  // namespace ifield
