#pragma once

#include <vector>

#include "ifield/field_core.hpp"

namespace ifield {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct ExtendedPoint {
  Point base;
  double u = 0.0;
};

enum class EtaChoice { DPhi, BFlat };

OneForm eta_dphi();
// B-flat with respect to the system metric; requires a metric.
OneForm eta_bflat(const IntegrableSystem& sys);

struct EmbedOptions {
  double covolume_floor = 1e-8;     // min |beta ^ eta| coefficient
  bool check_surface_condition = false;
  double surface_tol = 1e-7;        // |d eta (B, J)| on p-surfaces
  std::vector<Point> samples;       // where the hypotheses are checked
};

// omega = beta + du ^ eta + u d eta on M x R, coordinates (x, y, phi, u).
struct ExtendedSystem {
  IntegrableSystem sys;
  OneForm eta;
  TwoForm beta;
  TwoForm d_eta;
  bool eta_closed = false;  // d eta = 0 identically (eta = dphi)

  Mat4 omega4(const ExtendedPoint& z) const;
  Vec4 dH(const ExtendedPoint&) const { return {0.0, 0.0, 0.0, 1.0}; }
  Vec4 dp_tilde(const ExtendedPoint& z) const;
};

ExtendedSystem eta_embed(const IntegrableSystem& sys, const OneForm& eta, const EmbedOptions& opt = {},
                         bool eta_closed = false);

// In the order (x, y, phi, u), Pf = -(beta ^ eta coefficient) at u = 0.
double pfaffian(const Mat4& a);

// Minimum |Pf(omega)| over the samples.
double check_symplectic(const ExtendedSystem& ext, const std::vector<ExtendedPoint>& samples);

enum class Hamiltonian { H, PTilde };
// Solves i_X omega = -df.
Vec4 hamiltonian_vf(const ExtendedSystem& ext, Hamiltonian f, const ExtendedPoint& z);
double poisson_bracket(const ExtendedSystem& ext, Hamiltonian f, Hamiltonian g, const ExtendedPoint& z);

// Largest |u| with Pf keeping the sign it has at u = 0 at every sample,
// found by doubling then bisection up to u_cap.
double nondegeneracy_band(const ExtendedSystem& ext, const std::vector<Point>& samples, double u_cap = 1e3);

// Max |d omega| over the four 3-form coefficients of the 4-D exterior
// derivative, by finite differences.
double closedness_residual(const ExtendedSystem& ext, const std::vector<ExtendedPoint>& samples);

struct EmbeddingReport {
  double max_xh = 0.0;            // |X_H - B / eta(B)|
  double max_xp = 0.0;            // |X_p - (J - eta(J)/eta(B) B)|
  double max_poisson = 0.0;       // |{p_tilde, H}|
  double max_antisymmetry = 0.0;  // |{p,H} + {H,p}|
  double min_coisotropy = 0.0;    // min |omega(d_u, B)| = |eta(B)|
  double min_pfaffian = 0.0;
  double max_pfaffian_covolume = 0.0;  // |-Pf - beta ^ eta coefficient| at u = 0
  double max_slice = 0.0;         // |omega restricted to u = 0 - beta|
  double max_d_omega = 0.0;
  double u_band = 0.0;
  std::size_t n_samples = 0;
};

EmbeddingReport verify_embedding(const IntegrableSystem& sys, const OneForm& eta, const std::vector<Point>& samples,
                                 bool eta_closed = false);

}  // namespace ifield
