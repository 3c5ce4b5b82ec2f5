#pragma once

#include <array>
#include <functional>
#include <vector>

#include "ifield/flux_actions.hpp"

namespace ifield {

using Mat2i = Eigen::Matrix2i;

// A torus embedded in the solid torus, sampled on a uniform (theta, zeta)
// grid: grid[i * n_zeta + j] sits at (2 pi i / n_theta, 2 pi j / n_zeta).
// phi = winding . (theta, zeta) + periodic part.
struct SurfaceChart {
  double level = 0.0;  // value of p on the surface
  double psi = 0.0;    // toroidal flux
  int n_theta = 0;
  int n_zeta = 0;
  std::vector<Point> grid;
  std::array<TorusSeries, 3> embedding;  // x, y, periodic part of phi
  std::array<int, 2> winding{0, 1};
  double p_variation = 0.0;   // max |p - level| on the grid
  double fit_residual = 0.0;  // field-line method only: rms of the section fits

  Point at(double theta, double zeta) const;
  // d/dtheta and d/dzeta of the embedding.
  void tangents(double theta, double zeta, Vec3& x_theta, Vec3& x_zeta) const;
  // Tangents at every grid node, same layout as grid.
  void grid_tangents(std::vector<Vec3>& x_theta, std::vector<Vec3>& x_zeta) const;
  double theta(int i) const { return kTwoPi * i / n_theta; }
  double zeta(int j) const { return kTwoPi * j / n_zeta; }
};

// Fits the Fourier embedding to grid points.
SurfaceChart make_chart(double level, double psi, std::vector<Point> grid, int n_theta, int n_zeta,
                        std::array<int, 2> winding = {0, 1});

struct SurfaceOptions {
  enum class Method { Contour, FieldLine };
  int n_theta = 32;
  int n_zeta = 32;
  Method method = Method::Contour;
  double resonance_guard = 1e-3;  // field-line method: reject |m iota - n| below this
  double p_tol = 1e-8;            // max |p - level| accepted on the grid
  double fit_tol = 1e-7;          // field-line method: rms of the section fits
  int transits = 0;               // field-line method; 0 means 4 n_theta
  TraceOptions trace;
};

// The torus p = level in the polar angles of `geo` (t, phi).
SurfaceChart build_surface(const LevelGeometry& geo, double level, const SurfaceOptions& opt = {});
SurfaceChart build_surface(const IntegrableSystem& sys, double level, const SurfaceOptions& opt = {});

// Smallest |m iota - n| over 0 < m <= m_max, |n| <= n_max.
double resonance_distance(double iota, int m_max, int n_max);

struct ChartResiduals {
  double b_psi = 0.0;          // max |d psi (B)|
  double b_theta_std = 0.0;    // angular std of B^theta relative to |(B^theta, B^zeta)|
  double b_zeta_std = 0.0;
  double j_theta_std = 0.0;
  double j_zeta_std = 0.0;
  double jacobian_std = 0.0;   // relative angular std of the (psi, theta, zeta) Jacobian
  double cov_theta_std = 0.0;  // Boozer: angular std of B_theta relative to |(B_theta, B_zeta)|
  double cov_zeta_std = 0.0;
  double jacobian_min_ratio = 0.0;  // min/max of the Jacobian; > 0 witnesses an embedded chart

  double max_straightness() const;
  void merge(const ChartResiduals& o);
};

enum class ChartKind { Hamada, Boozer };
const char* to_string(ChartKind k);

struct HamadaSurface {
  SurfaceChart chart;      // grid at uniform straight-field-line angles
  TorusSeries d_theta;     // straight angle minus polar angle, on the polar grid
  TorusSeries d_zeta;
  Mat2 periods;            // loop integrals of the B, J coframe over (c_P, c_T)
  double closedness = 0.0; // exactness mismatch of the coframe
  Mat2i A = Mat2i::Identity();  // accumulated unimodular transforms
  Vec2 nu = Vec2::Zero();
  double dpsi_dlevel = 0.0;
  double F = 0.0, G = 0.0, K = 0.0, L = 0.0;
  Mat2 flux_matrix = Mat2::Zero();  // rows (F', -G'), (K', -L') in psi
  ChartResiduals residuals;

  double iota() const { return -flux_matrix(0, 1) / flux_matrix(0, 0); }
};

struct HamadaChart {
  ChartKind kind = ChartKind::Hamada;
  std::vector<HamadaSurface> surfaces;
  ChartResiduals residuals;  // max over surfaces
};

struct HamadaOptions {
  SurfaceOptions surface;
  FluxOptions flux;
  bool allow_current_fallback = true;  // K, L from derivative quadrature when kappa is absent
  double refine_tol = 1e-9;            // straightness residual that triggers doubling
  int max_resolution = 128;
  double mhs_tol = 1e-6;               // to_boozer acceptance of the MHS residual
  int threads = 1;
};

HamadaChart to_hamada(const IntegrableSystem& sys, const std::vector<double>& levels, const HamadaOptions& opt = {});
HamadaChart to_hamada(const LevelGeometry& geo, const std::vector<double>& levels, const HamadaOptions& opt = {});

// B' = B/|B|^2, J' = (B x grad p)/|B|^2, Omega' = |B|^2 Omega. Needs a metric.
IntegrableSystem reweighted_system(const IntegrableSystem& sys);

HamadaChart to_boozer(const IntegrableSystem& sys, const std::vector<double>& levels, const HamadaOptions& opt = {});
HamadaChart to_boozer(const LevelGeometry& geo, const std::vector<double>& levels, const HamadaOptions& opt = {});

// Residuals of one chart surface. For Boozer charts the straightness part is
// evaluated on the reweighted system and the covariant part on `sys`.
ChartResiduals verify_surface(const IntegrableSystem& sys, const SurfaceChart& chart, ChartKind kind,
                              double dpsi_dlevel);
ChartResiduals verify_chart(const IntegrableSystem& sys, HamadaChart& chart, ChartKind kind);

// Rows (F', -G') and (K', -L') from loop integrals of beta(N, .) and
// j(N, .) over the chart's theta and zeta cycles, dpsi(N) = 1.
Mat2 chart_flux_matrix(const IntegrableSystem& sys, const SurfaceChart& chart, double dpsi_dlevel);

// (theta, zeta) -> A (theta, zeta) + nu on every surface; det A must be 1.
HamadaChart sl2z_transform(const IntegrableSystem& sys, const HamadaChart& chart, const Mat2i& A,
                           const std::function<Vec2(double psi)>& nu = {});

struct Sl2zComparison {
  Mat2i A = Mat2i::Identity();  // angles2 = A angles1 + nu
  Vec2 nu = Vec2::Zero();
  double integrality = 0.0;  // distance of the measured linear part from integers
  double nu_std = 0.0;       // angular std of angles2 - A angles1
};

// Compares two charts of the same surface.
Sl2zComparison extract_sl2z(const SurfaceChart& c1, const SurfaceChart& c2);

// Angles of a physical point on the chart surface (Gauss-Newton).
Vec2 chart_angles(const SurfaceChart& chart, const Point& q);

}  // namespace ifield
