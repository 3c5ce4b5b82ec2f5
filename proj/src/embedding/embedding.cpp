#include "ifield/embedding.hpp"

#include <cmath>

namespace ifield {

namespace {

constexpr const char* kModule = "embedding";

double max_abs(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

OneForm eta_dphi() {
  OneForm e;
  e.eval = [](const Point&) { return Vec3(0.0, 0.0, 1.0); };
  e.jacobian = [](const Point&) { return Mat3::Zero().eval(); };
  return e;
}

OneForm eta_bflat(const IntegrableSystem& sys) {
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, kModule, "eta = B-flat requires a metric");
  return flat(sys.B, *sys.metric);
}

Mat4 ExtendedSystem::omega4(const ExtendedPoint& z) const {
  Mat4 a = Mat4::Zero();
  Mat3 W = two_form_matrix(beta(z.base));
  if (!eta_closed && z.u != 0.0) W += z.u * two_form_matrix(d_eta(z.base));
  a.topLeftCorner<3, 3>() = W;
  const Vec3 e = eta(z.base);
  // du ^ eta: omega(d_u, V) = eta(V)
  a.block<1, 3>(3, 0) = e.transpose();
  a.block<3, 1>(0, 3) = -e;
  return a;
}

Vec4 ExtendedSystem::dp_tilde(const ExtendedPoint& z) const {
  const Vec3 g = sys.p.grad(z.base);
  return {g[0], g[1], g[2], 0.0};
}

ExtendedSystem eta_embed(const IntegrableSystem& sys, const OneForm& eta, const EmbedOptions& opt, bool eta_closed) {
  ExtendedSystem ext;
  ext.sys = sys;
  ext.eta = eta;
  ext.beta = flux_form(sys.B, sys.omega);
  ext.d_eta = exterior_derivative(eta);
  ext.eta_closed = eta_closed;
  for (const auto& q : opt.samples) {
    const double cov = two_form_dual(ext.beta(q)).dot(eta(q));
    if (!(std::abs(cov) >= opt.covolume_floor))
      throw Error(ErrorCode::EtaNotCovolume, kModule, "beta ^ eta degenerates",
                  "x=" + std::to_string(q.x) + " y=" + std::to_string(q.y) + " phi=" + std::to_string(q.phi));
    if (opt.check_surface_condition && !eta_closed) {
      const double s = two_form_apply(ext.d_eta(q), sys.B(q), sys.J(q));
      if (std::abs(s) > opt.surface_tol)
        throw Error(ErrorCode::EtaSurfaceCondition, kModule, "d eta does not vanish on p-surfaces",
                    "residual=" + std::to_string(s));
    }
  }
  return ext;
}

double pfaffian(const Mat4& a) { return a(0, 1) * a(2, 3) - a(0, 2) * a(1, 3) + a(0, 3) * a(1, 2); }

double check_symplectic(const ExtendedSystem& ext, const std::vector<ExtendedPoint>& samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, kModule, "check_symplectic needs samples");
  double m = std::numeric_limits<double>::infinity();
  for (const auto& z : samples) m = std::min(m, std::abs(pfaffian(ext.omega4(z))));
  return m;
}

Vec4 hamiltonian_vf(const ExtendedSystem& ext, Hamiltonian f, const ExtendedPoint& z) {
  const Mat4 a = ext.omega4(z);
  if (std::abs(pfaffian(a)) < 1e-12)
    throw Error(ErrorCode::SingularOmega, kModule, "omega is degenerate at the point");
  // i_X omega = -df  <=>  -a X = -df  <=>  a X = df
  const Vec4 df = (f == Hamiltonian::H) ? ext.dH(z) : ext.dp_tilde(z);
  return a.partialPivLu().solve(df);
}

double poisson_bracket(const ExtendedSystem& ext, Hamiltonian f, Hamiltonian g, const ExtendedPoint& z) {
  return hamiltonian_vf(ext, f, z).dot(ext.omega4(z) * hamiltonian_vf(ext, g, z));
}

double nondegeneracy_band(const ExtendedSystem& ext, const std::vector<Point>& samples, double u_cap) {
  auto ok = [&](double u) {
    for (const auto& q : samples) {
      const double p0 = pfaffian(ext.omega4({q, 0.0}));
      for (double s : {u, -u})
        if (pfaffian(ext.omega4({q, s})) * p0 <= 0.0) return false;
    }
    return true;
  };
  if (ext.eta_closed) return u_cap;
  double good = 0.0, bad = 1e-3;
  while (ok(bad)) {
    good = bad;
    bad *= 2.0;
    if (bad > u_cap) return u_cap;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (good + bad);
    (ok(mid) ? good : bad) = mid;
  }
  return good;
}

double closedness_residual(const ExtendedSystem& ext, const std::vector<ExtendedPoint>& samples) {
  const double h = 1e-4;
  auto shifted = [](const ExtendedPoint& z, int k, double d) {
    ExtendedPoint w = z;
    if (k == 0) w.base.x += d;
    else if (k == 1) w.base.y += d;
    else if (k == 2) w.base.phi += d;
    else w.u += d;
    return w;
  };
  auto deriv = [&](const ExtendedPoint& z, int k) -> Mat4 {
    return (ext.omega4(shifted(z, k, -2 * h)) - 8.0 * ext.omega4(shifted(z, k, -h)) +
            8.0 * ext.omega4(shifted(z, k, h)) - ext.omega4(shifted(z, k, 2 * h))) /
           (12.0 * h);
  };
  double m = 0.0;
  for (const auto& z : samples) {
    Mat4 D[4];
    for (int k = 0; k < 4; ++k) D[k] = deriv(z, k);
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        for (int c = b + 1; c < 4; ++c)
          m = std::max(m, std::abs(D[a](b, c) + D[b](c, a) + D[c](a, b)));
  }
  return m;
}

EmbeddingReport verify_embedding(const IntegrableSystem& sys, const OneForm& eta, const std::vector<Point>& samples,
                                 bool eta_closed) {
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, kModule, "verify_embedding needs samples");
  EmbedOptions opt;
  opt.samples = samples;
  const ExtendedSystem ext = eta_embed(sys, eta, opt, eta_closed);
  EmbeddingReport rep;
  rep.n_samples = samples.size();
  rep.min_coisotropy = std::numeric_limits<double>::infinity();
  rep.min_pfaffian = std::numeric_limits<double>::infinity();
  std::vector<ExtendedPoint> zs;
  for (const auto& q : samples) {
    const ExtendedPoint z{q, 0.0};
    zs.push_back(z);
    const Vec3 B = sys.B(q), J = sys.J(q), e = eta(q);
    const double eB = e.dot(B), eJ = e.dot(J);
    Vec4 xh_expect, xp_expect;
    xh_expect << B / eB, 0.0;
    xp_expect << J - (eJ / eB) * B, 0.0;
    const Vec4 xh = hamiltonian_vf(ext, Hamiltonian::H, z);
    const Vec4 xp = hamiltonian_vf(ext, Hamiltonian::PTilde, z);
    rep.max_xh = std::max(rep.max_xh, max_abs(xh - xh_expect));
    rep.max_xp = std::max(rep.max_xp, max_abs(xp - xp_expect));
    const Mat4 a = ext.omega4(z);
    const double pb = xp.dot(a * xh), bp = xh.dot(a * xp);
    rep.max_poisson = std::max(rep.max_poisson, std::abs(pb));
    rep.max_antisymmetry = std::max(rep.max_antisymmetry, std::abs(pb + bp));
    Vec4 du(0, 0, 0, 1), blift;
    blift << B, 0.0;
    rep.min_coisotropy = std::min(rep.min_coisotropy, std::abs(du.dot(a * blift)));
    const double pf = pfaffian(a);
    rep.min_pfaffian = std::min(rep.min_pfaffian, std::abs(pf));
    const double cov = two_form_dual(ext.beta(q)).dot(e);
    rep.max_pfaffian_covolume = std::max(rep.max_pfaffian_covolume, std::abs(-pf - cov));
    rep.max_slice = std::max(rep.max_slice, max_abs(two_form_from_matrix(a.topLeftCorner<3, 3>()) - ext.beta(q)));
  }
  rep.max_d_omega = closedness_residual(ext, zs);
  rep.u_band = nondegeneracy_band(ext, samples);
  return rep;
}

}  // namespace ifield
