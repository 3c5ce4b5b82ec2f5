#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ifield/surface_coords.hpp"

namespace ifield {

// ---------------------------------------------------------------------------
// Polar conventions of the normalized charts. Poloidal angles run in the
// beta-positive sense: (x, y) = (r cos t, -r sin t), so dy^dx = dpsi^dt with
// psi = r^2 / 2.

Point polar_point(double r, double t, double phi);
// r and t of a chart point (t = 0 at the origin).
void polar_coords(const Point& q, double& r, double& t);

// Smooth function of psi stored as an even spline in r = sqrt(2 psi).
class EvenProfile {
 public:
  EvenProfile() = default;
  EvenProfile(const std::vector<double>& r_nodes, const std::vector<double>& values);
  double operator()(double psi) const;
  double derivative(double psi) const;  // d / d psi
  bool empty() const { return s_.empty(); }

 private:
  VectorSpline s_;
};

// Scalar fields on a disk of tori: Fourier series in (t, phi) on every node
// radius, coefficients splined across r with parity (-1)^m so that the
// fields are smooth through the axis.
class PolarTable {
 public:
  struct Sample {
    double v = 0.0, dr = 0.0, dt = 0.0, dphi = 0.0;
  };

  PolarTable() = default;
  // values[f][k] is the n_theta * n_phi grid of field f on node r_nodes[k].
  PolarTable(const std::vector<double>& r_nodes, int n_theta, int n_phi,
             const std::vector<std::vector<std::vector<double>>>& values);

  int fields() const { return n_fields_; }
  double r_max() const { return r_max_; }
  int terms() const { return static_cast<int>(terms_.size()); }
  void eval(double r, double t, double phi, std::vector<Sample>& out) const;
  Sample eval(int field, double r, double t, double phi) const;

 private:
  int n_fields_ = 0;
  int n_theta_ = 0, n_phi_ = 0;
  double r_max_ = 0.0;
  struct Term {
    int field, index, m, n;
  };
  std::vector<Term> terms_;  // one spline column pair per retained (field, mode)
  VectorSpline spline_;
};

// psi-preserving map of a normalized chart given by angle displacements:
// inverse(new) has angles new + D(r, new angles) at the same r.
class TorusMap : public Diffeo {
 public:
  TorusMap(PolarTable displacement, std::string name);
  Point forward(const Point& x) const override;
  Point inverse(const Point& y) const override;
  Mat3 jacobian(const Point& x) const override;
  LocalFrame at_new(const Point& y) const override;
  std::string describe() const override { return name_; }
  double r_max() const { return table_.r_max(); }
  double max_displacement() const { return max_disp_; }
  void set_max_displacement(double d) { max_disp_ = d; }

 private:
  PolarTable table_;
  std::string name_;
  double max_disp_ = 0.0;
};

// Pullback of a two-form through a map (evaluated at new points).
TwoForm pull_back(const TwoForm& b, DiffeoPtr map);

// ---------------------------------------------------------------------------
// Solution of i_X beta + g(X, B) B-flat = alpha. With i_B alpha = 0 it is the
// unique X with i_X beta = alpha and g(X, B) = 0.

Vec3 bhat_solve(const Vec3& beta, const Vec3& B, const Vec3& alpha, const Mat3& g = Mat3::Identity());
Vec3 bhat_solve(const TwoForm& beta, const VectorField& B, const OneForm& alpha, const Point& q,
                const Metric* g = nullptr);

// ---------------------------------------------------------------------------

struct NearAxisOptions {
  double r_max = 0.4;        // flux-coordinate radius requested; work starts at 0.8 r_max
  double r_floor = 1e-3;     // smallest working radius tried
  int n_r = 24;              // torus nodes across the working radius
  int n_theta = 32;
  int n_phi = 32;
  int n_axis = 64;           // axis samples for the Morse-Bott frame
  int n_flux = 40;           // levels in the flux tables
  double ode_tol = 1e-12;
  double period_tol = 1e-8;  // flux matching on every torus
  double rank_floor = 1e-3;  // min of a_t^2 + r^2 a_phi^2 along the interpolation
  double r_lambda_floor = 1e-3;
  double quadratic_radius = 0.05;
  double r_verify = 0.05;    // verification radius (capped by the working radius)
  double mhs_tol = 1e-6;
  enum class Route { TwoForm, Sigma };
  Route route = Route::TwoForm;  // how the Moser potential h is obtained
  int verify_trajectories = 12;  // 3-D trajectories for the psi-preservation check
  int threads = 1;
};

struct MBChart {
  DiffeoPtr map;          // original -> (X, Y, phi), axis at the origin
  AxisReport axis;
  AxisKind kind = AxisKind::Elliptic;
  double c = 0.0;         // p = p_axis + c (X^2 + eps Y^2) / 2 + o(|W|^2)
  double c_spread = 0.0;  // relative variation of c along the axis
  int eps = 1;
  double p_axis = 0.0;
  double cover_period = kTwoPi;  // 4 pi when the eigenframe needs the double cover
  bool deck_flip = false;        // frame(phi + 2 pi) = -frame(phi)
  double beta_axis_residual = 0.0;  // max |beta - dY^dX| on the axis
  double quadratic_residual = 0.0;  // max |p - p_axis - c(X^2 + eps Y^2)/2| / (|c| s^2 / 2) at radius s
  double quadratic_radius = 0.0;
};

MBChart morse_bott_normalize(const IntegrableSystem& sys, const AxisReport& report,
                             const NearAxisOptions& opt = {});

// Flux functions of the rescaled chart. psi = Psi_T(p).
struct FluxFunctions {
  double p_axis = 0.0;
  double c = 1.0;
  VectorSpline q;       // Psi_T(p) = (p - p_axis) q(rho), rho = sqrt(2 (p - p_axis) / c), even
  EvenProfile p_ratio;  // (P(psi) - p_axis) / psi
  EvenProfile dp_dpsi;
  EvenProfile iota;
  EvenProfile psi_p;
  double psi_max = 0.0;

  double psi_of_p(double p) const;
  double dpsi_dp(double p) const;
  double P(double psi) const { return p_axis + psi * p_ratio(psi); }
};

struct FluxChart {
  MBChart mb;
  std::shared_ptr<const FluxFunctions> f;
  DiffeoPtr map;            // original -> (x, y, phi) with psi = (x^2 + y^2) / 2
  IntegrableSystem system;  // sys in flux coordinates
  TwoForm beta;             // flux form in flux coordinates
  double beta_axis_residual = 0.0;
  double r_max = 0.0;       // flux radius covered by the tables

  double iota(double psi) const { return f->iota(psi); }
  double P(double psi) const { return f->P(psi); }
  double dP(double psi) const { return f->dp_dpsi(psi); }
  double psi_p(double psi) const { return f->psi_p(psi); }
};

FluxChart flux_coordinates(const IntegrableSystem& sys, const MBChart& mb, const NearAxisOptions& opt = {});

// alpha_* = (y dx - x dy) / 2 - Psi_P(psi) dphi in flux coordinates.
OneForm alpha_star(const FluxChart& chart);

struct SigmaSolution {
  ScalarField sigma;                 // flux coordinates
  std::shared_ptr<const PolarTable> table;
  double max_period = 0.0;           // largest period of alpha - alpha_* over the tori
  double tangential_residual = 0.0;  // max |d sigma - (alpha_* - alpha)| along the tori
};

// Per-torus primitive of (alpha_* - alpha) with zero mean, on tori at the given psi.
SigmaSolution solve_sigma(const FluxChart& chart, const OneForm& alpha_star, const std::vector<double>& psi_levels,
                          const NearAxisOptions& opt = {});

struct NormalFormReport {
  double beta_residual = 0.0;   // max |Phi^* beta - beta_*| on the verification grid
  double p_std = 0.0;           // max angular std of p at fixed psi
  double psi_drift = 0.0;       // max |psi(phi_lambda) - psi| along 3-D trajectories
  double tangency = 0.0;        // max |i_xi dpsi| along those trajectories
  double trajectory_mismatch = 0.0;  // 3-D trajectory endpoints against the tabulated map
  double max_period = 0.0;      // flux matching mismatch over the tori
  double closedness = 0.0;      // mixed-mode mismatch of the pulled-back forms
  double min_rank = 0.0;        // min of a_t^2 + r^2 a_phi^2 over tori and lambda
  double max_displacement = 0.0;
  double r_work = 0.0;
  double r_verify = 0.0;
  int n_r = 0, n_theta = 0, n_phi = 0;
  std::string route;
  std::vector<double> tried_radii;
};

// Data of the Moser interpolation at one lambda, in flux coordinates.
struct MoserState {
  double lambda = 0.0;
  ScalarField h;        // i_xi beta_lambda = h dpsi
  ScalarField sigma;    // empty unless the sigma route was used
  VectorField xi;
  TwoForm beta_lambda;
};

struct NormalFormChart {
  FluxChart flux;
  std::shared_ptr<const TorusMap> moser;
  std::shared_ptr<const PolarTable> h;  // Moser potential on the tori
  DiffeoPtr map;            // original -> normal form
  IntegrableSystem system;  // sys in normal-form coordinates
  NormalFormReport report;
  std::shared_ptr<const SigmaSolution> sigma;

  double P(double psi) const { return flux.P(psi); }
  double psi_p(double psi) const { return flux.psi_p(psi); }
  double iota(double psi) const { return flux.iota(psi); }
};

NormalFormChart moser_normalize(const IntegrableSystem& sys, const FluxChart& chart,
                                const NearAxisOptions& opt = {}, const SigmaSolution* sigma = nullptr);
MoserState moser_state(const NormalFormChart& nf, double lambda);

// Full elliptic pipeline: Morse-Bott chart, flux rescaling, Moser flow.
NormalFormChart near_axis_normal_form(const IntegrableSystem& sys, const AxisReport& report,
                                      const NearAxisOptions& opt = {});

// beta_* = dy^dx - iota dpsi^dphi as a stored two-form at a chart point.
Vec3 beta_star(double iota, const Point& q);

// Verification grid: r_i = r_v i / 16 (i = 1..16), 16 angles, 32 toroidal angles.
std::vector<Point> verification_grid(double r_verify, int n_r = 16, int n_theta = 16, int n_phi = 32);

struct NAHReport {
  double beta_residual = 0.0;   // |Phi^* beta - (dy^dx - G' dpsi^dphi)|
  double j_residual = 0.0;      // |Phi^* j - (K' dy^dx - L' dpsi^dphi)|
  double jacobian_std = 0.0;    // relative angular std of the volume density at fixed psi
  double commutator_B = 0.0;    // max |[d_zeta, B]|
  double commutator_J = 0.0;
  double r_lambda_min = 0.0;    // over the tori and lambda in [0, 1]
  double r_lambda_axis_min = 0.0;
  double r_lambda_bound = 0.0;  // rho_min / rho_max on the axis
  double closedness = 0.0;
  double max_displacement = 0.0;
  double r_work = 0.0;
  double r_verify = 0.0;
};

struct NAHChart {
  ChartKind kind = ChartKind::Hamada;
  NormalFormChart nf;
  std::shared_ptr<const TorusMap> flow;
  std::shared_ptr<const PolarTable> h;  // i_xi j_lambda = h dpsi
  DiffeoPtr map;            // original (or reweighted) -> near-axis chart
  IntegrableSystem system;  // the system the chart was built for, in chart coordinates
  EvenProfile K_ratio;  // K(psi) / psi, so that K(0) = 0
  EvenProfile L_profile;
  EvenProfile dK, dL, dV;  // dV = V'(psi)
  NAHReport report;
  // Residuals of the Boozer restriction (Boozer kind only).
  ChartResiduals boozer_residuals;

  double P(double psi) const { return nf.P(psi); }
  double iota(double psi) const { return nf.iota(psi); }
  double K(double psi) const { return psi * K_ratio(psi); }
  double L(double psi) const { return L_profile(psi); }
};

struct NAHState {
  const NAHChart* chart = nullptr;
  // r_lambda and b_lambda at a normal-form point.
  double r_lambda(const Point& q, double lambda) const;
  double b_lambda(const Point& q, double lambda) const;
};

NAHChart near_axis_hamada(const IntegrableSystem& sys, const NormalFormChart& nf, const NearAxisOptions& opt = {});
NAHChart near_axis_boozer(const IntegrableSystem& sys, const AxisReport& report, const NearAxisOptions& opt = {});

// Off-axis restriction: surfaces psi = const with theta, zeta the polar angles
// of the chart, as a chart usable by verify_chart.
HamadaChart restrict_chart(const NAHChart& chart, const std::vector<double>& psi, int n_theta = 32, int n_zeta = 32);

}  // namespace ifield
