#include <cmath>

#include "ifield/near_axis.hpp"

namespace ifield {

namespace {

constexpr const char* kModule = "near_axis";

Mat3 checked_inverse(const Mat3& J, const Point& y) {
  const double det = J.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-14)
    throw Error(ErrorCode::NonInvertibleJacobian, kModule, "torus map Jacobian is singular",
                "det=" + std::to_string(det) + " at (" + std::to_string(y.x) + ", " + std::to_string(y.y) + ", " +
                    std::to_string(y.phi) + ")");
  return J.inverse();
}

}  // namespace

Point polar_point(double r, double t, double phi) { return {r * std::cos(t), -r * std::sin(t), phi}; }

void polar_coords(const Point& q, double& r, double& t) {
  r = std::hypot(q.x, q.y);
  t = r > 0.0 ? std::atan2(-q.y, q.x) : 0.0;
}

// ---------------------------------------------------------------------------

EvenProfile::EvenProfile(const std::vector<double>& r_nodes, const std::vector<double>& values) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t k = 0; k < values.size(); ++k) v(static_cast<Eigen::Index>(k), 0) = values[k];
  s_ = mirrored_spline(r_nodes, v, {1});
}

double EvenProfile::operator()(double psi) const { return s_.eval(std::sqrt(2.0 * std::max(psi, 0.0)), 0)[0]; }

double EvenProfile::derivative(double psi) const {
  // d/dpsi = (1/r) d/dr; the spline derivative is odd in r
  const double r = std::max(std::sqrt(2.0 * std::max(psi, 0.0)), 1e-7);
  return s_.eval(r, 1)[0] / r;
}

// ---------------------------------------------------------------------------

PolarTable::PolarTable(const std::vector<double>& r_nodes, int n_theta, int n_phi,
                       const std::vector<std::vector<std::vector<double>>>& values)
    : n_fields_(static_cast<int>(values.size())), n_theta_(n_theta), n_phi_(n_phi) {
  const int nr = static_cast<int>(r_nodes.size());
  if (n_fields_ == 0 || nr < 2) throw Error(ErrorCode::InvalidParameter, kModule, "empty polar table");
  r_max_ = r_nodes.back();
  std::vector<std::vector<TorusSeries>> series(n_fields_);
  for (int f = 0; f < n_fields_; ++f) {
    if (static_cast<int>(values[f].size()) != nr)
      throw Error(ErrorCode::InvalidParameter, kModule, "polar table node count mismatch");
    for (int k = 0; k < nr; ++k) series[f].push_back(TorusSeries::from_grid(values[f][k], n_theta, n_phi, -1.0));  // keep every mode
  }
  // keep the (field, mode) pairs that are above round-off on some node
  const int M = static_cast<int>(series[0][0].modes().size());
  for (int f = 0; f < n_fields_; ++f) {
    double scale = 0.0;
    for (int k = 0; k < nr; ++k)
      for (const auto& md : series[f][k].modes()) scale = std::max(scale, std::abs(md.c));
    for (int i = 0; i < M; ++i) {
      double big = 0.0;
      for (int k = 0; k < nr; ++k) big = std::max(big, std::abs(series[f][k].modes()[i].c));
      if (big > 1e-15 * scale && big > 1e-300) {
        const auto& md = series[f][0].modes()[i];
        terms_.push_back({f, i, md.m, md.n});
      }
    }
  }
  const int T = static_cast<int>(terms_.size());
  Eigen::MatrixXd v(nr, std::max(2 * T, 2));
  v.setZero();
  std::vector<int> parity(static_cast<std::size_t>(std::max(2 * T, 2)), 1);
  for (int c = 0; c < T; ++c) {
    const Term& tm = terms_[c];
    for (int k = 0; k < nr; ++k) {
      const auto z = series[tm.field][k].modes()[tm.index].c;
      v(k, 2 * c) = z.real();
      v(k, 2 * c + 1) = z.imag();
    }
    parity[2 * c] = parity[2 * c + 1] = (std::abs(tm.m) % 2 == 0) ? 1 : -1;
  }
  spline_ = mirrored_spline(r_nodes, v, parity);
}

void PolarTable::eval(double r, double t, double phi, std::vector<Sample>& out) const {
  thread_local Eigen::VectorXd cf, dc;
  spline_.eval_both(r, cf, dc);
  const int mh = n_theta_ / 2 + 1, nh = n_phi_ / 2 + 1;
  thread_local std::vector<std::complex<double>> et, ep;
  et.resize(2 * mh + 1);
  ep.resize(2 * nh + 1);
  const std::complex<double> zt = std::polar(1.0, t), zp = std::polar(1.0, phi);
  et[mh] = 1.0;
  for (int k = 1; k <= mh; ++k) {
    et[mh + k] = et[mh + k - 1] * zt;
    et[mh - k] = std::conj(et[mh + k]);
  }
  ep[nh] = 1.0;
  for (int k = 1; k <= nh; ++k) {
    ep[nh + k] = ep[nh + k - 1] * zp;
    ep[nh - k] = std::conj(ep[nh + k]);
  }
  out.assign(n_fields_, Sample{});
  for (int c = 0; c < static_cast<int>(terms_.size()); ++c) {
    const Term& tm = terms_[c];
    const std::complex<double> e = et[mh + tm.m] * ep[nh + tm.n];
    const std::complex<double> z = std::complex<double>(cf[2 * c], cf[2 * c + 1]) * e;
    Sample& s = out[tm.field];
    s.v += z.real();
    s.dt -= tm.m * z.imag();
    s.dphi -= tm.n * z.imag();
    s.dr += (std::complex<double>(dc[2 * c], dc[2 * c + 1]) * e).real();
  }
}

PolarTable::Sample PolarTable::eval(int field, double r, double t, double phi) const {
  std::vector<Sample> s;
  eval(r, t, phi, s);
  return s.at(static_cast<std::size_t>(field));
}

// ---------------------------------------------------------------------------

TorusMap::TorusMap(PolarTable displacement, std::string name)
    : table_(std::move(displacement)), name_(std::move(name)) {
  if (table_.fields() != 2) throw Error(ErrorCode::InvalidParameter, kModule, "torus map needs two fields");
}

Point TorusMap::inverse(const Point& y) const {
  double r, t;
  polar_coords(y, r, t);
  if (r > table_.r_max() * (1.0 + 1e-9))
    throw Error(ErrorCode::DomainExit, kModule, "point outside the working radius of " + name_,
                "r=" + std::to_string(r));
  std::vector<PolarTable::Sample> d;
  table_.eval(r, t, y.phi, d);
  return polar_point(r, t + d[0].v, y.phi + d[1].v);
}

Point TorusMap::forward(const Point& x) const {
  double r, to;
  polar_coords(x, r, to);
  if (r > table_.r_max() * (1.0 + 1e-9))
    throw Error(ErrorCode::DomainExit, kModule, "point outside the working radius of " + name_,
                "r=" + std::to_string(r));
  std::vector<PolarTable::Sample> d;
  table_.eval(r, to, x.phi, d);
  double t = to - d[0].v, phi = x.phi - d[1].v;
  for (int it = 0; it < 60; ++it) {
    table_.eval(r, t, phi, d);
    double ft = t + d[0].v - to;
    ft -= kTwoPi * std::round(ft / kTwoPi);
    const double fp = phi + d[1].v - x.phi;
    Mat2 J;
    J << 1.0 + d[0].dt, d[0].dphi, d[1].dt, 1.0 + d[1].dphi;
    const Vec2 step = J.partialPivLu().solve(Vec2(ft, fp));
    t -= step[0];
    phi -= step[1];
    if (step.cwiseAbs().maxCoeff() < 1e-15) break;
    if (it == 59)
      throw Error(ErrorCode::NewtonDivergence, kModule, "torus map inversion did not converge", name_);
  }
  return polar_point(r, t, phi);
}

LocalFrame TorusMap::at_new(const Point& y) const {
  double r, t;
  polar_coords(y, r, t);
  if (r > table_.r_max() * (1.0 + 1e-9))
    throw Error(ErrorCode::DomainExit, kModule, "point outside the working radius of " + name_,
                "r=" + std::to_string(r));
  const double re = std::max(r, 1e-10);
  std::vector<PolarTable::Sample> d;
  table_.eval(r, t, y.phi, d);
  const double to = t + d[0].v;
  LocalFrame f;
  f.old_point = polar_point(r, to, y.phi + d[1].v);
  const double ct = std::cos(t), st = std::sin(t);
  // dr and dt as covectors over (dx, dy, dphi) at the new point
  const Vec3 dr(ct, -st, 0.0);
  const Vec3 dt(-st / re, -ct / re, 0.0);
  const Vec3 dp(0.0, 0.0, 1.0);
  const Vec3 dto = d[0].dr * dr + (1.0 + d[0].dt) * dt + d[0].dphi * dp;
  const Vec3 dpo = d[1].dr * dr + d[1].dt * dt + (1.0 + d[1].dphi) * dp;
  const double co = std::cos(to), so = std::sin(to);
  Mat3 J;
  J.row(0) = (co * dr - re * so * dto).transpose();
  J.row(1) = (-so * dr - re * co * dto).transpose();
  J.row(2) = dpo.transpose();
  f.d_inverse = J;
  f.d_forward = checked_inverse(J, y);
  return f;
}

Mat3 TorusMap::jacobian(const Point& x) const { return at_new(forward(x)).d_forward; }

// ---------------------------------------------------------------------------

TwoForm pull_back(const TwoForm& b, DiffeoPtr map) {
  TwoForm out;
  out.eval = [b, map](const Point& y) -> Vec3 {
    const LocalFrame f = map->at_new(y);
    return pull_two_form(f, b(f.old_point));
  };
  return out;
}

Vec3 bhat_solve(const Vec3& beta, const Vec3& B, const Vec3& alpha, const Mat3& g) {
  const double scale = std::max(1.0, alpha.norm()) * std::max(1.0, B.norm());
  if (std::abs(alpha.dot(B)) > 1e-8 * scale)
    throw Error(ErrorCode::PreconditionFailed, kModule, "i_B alpha must vanish",
                "i_B alpha=" + std::to_string(alpha.dot(B)));
  const Vec3 bf = g * B;
  // i_X beta = W^T X = -W X
  const Mat3 A = -two_form_matrix(beta) + bf * bf.transpose();
  const double s = std::max(two_form_matrix(beta).norm(), bf.squaredNorm());
  const double det = A.determinant();
  if (!(std::abs(det) > 1e-12 * s * s * s))
    throw Error(ErrorCode::SingularSystem, kModule, "beta is degenerate beyond its kernel",
                "det=" + std::to_string(det));
  return A.partialPivLu().solve(alpha);
}

Vec3 bhat_solve(const TwoForm& beta, const VectorField& B, const OneForm& alpha, const Point& q, const Metric* g) {
  return bhat_solve(beta(q), B(q), alpha(q), g ? (*g)(q) : Mat3::Identity().eval());
}

}  // namespace ifield
