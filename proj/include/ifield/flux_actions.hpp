#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ifield/fieldline.hpp"

namespace ifield {

struct Loop {
  enum class Homology { Poloidal, Toroidal };
  std::function<Point(double)> point;   // t in [0, 2pi)
  std::function<Vec3(double)> tangent;  // optional, d point / dt
  Homology homology = Homology::Poloidal;
};

struct LoopIntegral {
  double value = 0.0;  // (1/2pi) of the line integral
  int n_quad = 0;
  bool converged = false;
};

LoopIntegral loop_integral(const OneForm& alpha, const Loop& loop, int n_quad = 16);

// Level sets of p around an elliptic axis, located by radial root solves
// from the axis in each section. Poloidal directions follow the beta-positive
// orientation, e(t) = (cos t, o sin t).
class LevelGeometry {
 public:
  LevelGeometry(IntegrableSystem sys, ClosedOrbit axis, int orientation, double r_search = 2.0);

  const IntegrableSystem& system() const { return sys_; }
  const ClosedOrbit& axis() const { return axis_; }
  int orientation() const { return orientation_; }
  double p_axis() const { return p_axis_; }

  Vec2 direction(double t) const { return {std::cos(t), orientation_ * std::sin(t)}; }
  // s > 0 with p(axis(phi) + s e) = level; s_guess <= 0 means automatic.
  double radius(double level, double phi, const Vec2& e, double s_guess = -1.0) const;
  // d s / d level along the same ray.
  double radius_level_derivative(double level, double phi, const Vec2& e, double s) const;

  Point poloidal_point(double level, double phi, double t) const;
  Vec3 poloidal_tangent(double level, double phi, double t) const;
  Loop poloidal_loop(double level, double phi = 0.0) const;
  Loop toroidal_loop(double level, double t0 = 0.0) const;
  // Vector N with dp(N) = 1 pointing along the ray at a level point.
  Vec3 level_normal(const Point& q, double phi_dir_t) const;

 private:
  IntegrableSystem sys_;
  ClosedOrbit axis_;
  int orientation_;
  double p_axis_;
  double r_search_;
};

// Locates the axis from a guess and builds the geometry; rejects hyperbolic axes.
std::shared_ptr<LevelGeometry> make_level_geometry(const IntegrableSystem& sys, const Vec2& axis_guess = Vec2::Zero(),
                                                   double r_search = 2.0);

struct FluxOptions {
  bool allow_fallback = true;   // Stokes area integral when alpha is absent
  bool force_fallback = false;  // use the area integral even if alpha exists
  int n_quad = 16;
};

double toroidal_flux(const LevelGeometry& geo, double level, const FluxOptions& opt = {});
double poloidal_flux(const LevelGeometry& geo, double level, const FluxOptions& opt = {});
double toroidal_flux(const IntegrableSystem& sys, double level, const FluxOptions& opt = {});
double poloidal_flux(const IntegrableSystem& sys, double level, const FluxOptions& opt = {});

// Derivatives of both fluxes with respect to the level of p, from loop
// integrals of beta against the level normal.
struct FluxDerivatives {
  double dpsiT = 0.0;
  double dpsiP = 0.0;
};
FluxDerivatives flux_level_derivatives(const LevelGeometry& geo, double level, int n_quad = 16);

struct FluxProfile {
  std::vector<double> levels;  // values of p
  std::vector<double> psiT;
  std::vector<double> psiP;
  std::vector<double> iota;
  std::vector<double> dpsiT_dlevel;
  std::string method;  // "spline" or "loop"
};

FluxProfile flux_profile(const LevelGeometry& geo, const std::vector<double>& levels, const std::string& method = "spline",
                         const FluxOptions& opt = {}, int threads = 1);
FluxProfile flux_profile(const IntegrableSystem& sys, const std::vector<double>& levels,
                         const std::string& method = "spline", const FluxOptions& opt = {}, int threads = 1);

// Level of p whose toroidal flux equals psi (secant iteration).
double level_for_flux(const LevelGeometry& geo, double psi, const FluxOptions& opt = {});

}  // namespace ifield
