#pragma once

#include <optional>
#include <vector>

#include "ifield/field_core.hpp"
#include "ifield/numerics.hpp"

namespace ifield {

struct TraceOptions {
  double tol = 1e-12;        // absolute and relative RK tolerance
  double bphi_min = 1e-10;   // |B^phi| floor
  double r_max = 1e3;        // escape radius in the (x, y) plane
};

struct Trace {
  std::vector<Point> points;  // at the requested output angles
  OdeStats stats;
  double tol = 0.0;
};

// Field line with phi as time, output at n_out + 1 equally spaced angles
// covering [start.phi, start.phi + phi_span].
Trace trace(const VectorField& B, const Point& start, double phi_span, int n_out,
            const TraceOptions& opt = {});

struct PoincareResult {
  Vec2 point;
  std::optional<Mat2> jacobian;
  OdeStats stats;
};

PoincareResult poincare_map(const VectorField& B, const Vec2& z, bool with_jacobian, double phi0 = 0.0,
                            double span = kTwoPi, const TraceOptions& opt = {});

// Section points at phi = phi0 + 2 pi k, k = 0..n_transits.
std::vector<Vec2> poincare_orbit(const VectorField& B, const Vec2& seed, int n_transits,
                                 const TraceOptions& opt = {});

// A closed field line, sampled at n equally spaced phi over one period and
// interpolated trigonometrically.
struct ClosedOrbit {
  double period = kTwoPi;
  std::vector<Vec2> samples;
  PeriodicSeries series;
  double residual = 0.0;                // |P(z) - z| at convergence
  std::vector<double> newton_residuals;  // per iteration

  Vec2 at(double phi) const;
  Vec2 derivative(double phi) const;
  Vec2 second_derivative(double phi) const;
};

struct AxisOptions {
  double tol = 1e-11;
  int max_iter = 40;
  int n_samples = 64;
  double singular_det = 1e-12;
  TraceOptions trace;
};

ClosedOrbit find_axis(const VectorField& B, const Vec2& guess, const AxisOptions& opt = {});

struct MonodromyMatrix {
  Mat2 m;
  std::optional<Mat2> cover;  // map over the double cover when reflection hyperbolic
  double det() const { return m.determinant(); }
  double trace() const { return m.trace(); }
};

MonodromyMatrix monodromy(const VectorField& B, const ClosedOrbit& axis, const TraceOptions& opt = {});

enum class AxisKind { Elliptic, DirectHyperbolic, ReflectionHyperbolic };
const char* to_string(AxisKind k);

struct AxisReport {
  ClosedOrbit orbit;
  MonodromyMatrix monodromy;
  AxisKind kind = AxisKind::Elliptic;
  double iota0 = 0.0;             // rotation number of the linearization (elliptic)
  double hessian_c = 0.0;         // sqrt|det D^2 p| / |beta_yx| on the axis
  double hessian_c_spread = 0.0;  // relative variation of that ratio along the axis
  int hessian_pos = 0;            // signature of the transverse Hessian at phi = 0
  int hessian_neg = 0;
  int orientation = 1;            // +1 if beta(d_x, d_y) > 0 on the axis
  double p_axis = 0.0;
};

AxisReport classify_axis(const IntegrableSystem& sys, const ClosedOrbit& axis, const TraceOptions& opt = {});

// Sign of beta(d_x, d_y) at a point: +1 means counterclockwise poloidal loops.
int poloidal_orientation(const IntegrableSystem& sys, const Point& pt);

struct IotaEstimate {
  double iota = 0.0;            // weighted Birkhoff average of the angle advance
  double iota_linear_fit = 0.0;  // slope of a least-squares fit of the unwrapped angle
  double fit_rms = 0.0;
  int transits = 0;
};

// Poloidal angle advance per toroidal transit about the axis. orientation
// selects the positive sense (+1 counterclockwise in the chart).
IotaEstimate iota_fieldline(const VectorField& B, const Vec2& seed, int n_transits, const ClosedOrbit& axis,
                            int orientation = 1, const TraceOptions& opt = {});

}  // namespace ifield
