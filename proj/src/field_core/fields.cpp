#include <algorithm>
#include <random>
#include <type_traits>

#include "ifield/field_core.hpp"

namespace ifield {

namespace {

Point shifted(const Point& p, int axis, double h) {
  Point q = p;
  if (axis == 0) q.x += h;
  else if (axis == 1) q.y += h;
  else q.phi += h;
  return q;
}

// 4th-order central difference of a vector-valued function along one axis.
template <class F>
auto central_diff(const F& f, const Point& p, int axis, double h) {
  using R = std::decay_t<decltype(f(p))>;
  R out = (f(shifted(p, axis, -2 * h)) - 8.0 * f(shifted(p, axis, -h)) + 8.0 * f(shifted(p, axis, h)) -
           f(shifted(p, axis, 2 * h))) /
          (12.0 * h);
  return out;
}

template <class F>
Mat3 fd_jacobian(const F& f, const Point& p, double h) {
  Mat3 J;
  for (int j = 0; j < 3; ++j) J.col(j) = central_diff(f, p, j, h);
  return J;
}

double max_abs(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

Vec3 ScalarField::grad(const Point& p) const {
  if (gradient) return gradient(p);
  Vec3 g;
  for (int j = 0; j < 3; ++j) g[j] = central_diff(value, p, j, fd_step);
  return g;
}

Mat3 ScalarField::hess(const Point& p) const {
  if (hessian) return hessian(p);
  Mat3 H = fd_jacobian([this](const Point& q) { return grad(q); }, p, fd_step);
  return 0.5 * (H + H.transpose());
}

Mat3 VectorField::jac(const Point& p) const {
  if (jacobian) return jacobian(p);
  return fd_jacobian(eval, p, fd_step);
}

Mat3 OneForm::jac(const Point& p) const {
  if (jacobian) return jacobian(p);
  return fd_jacobian(eval, p, fd_step);
}

Metric euclidean_metric() {
  return Metric{[](const Point&) { return Mat3::Identity().eval(); }};
}

// ---------------------------------------------------------------------------

Mat3 two_form_matrix(const Vec3& b) {
  Mat3 W = Mat3::Zero();
  W(0, 1) = -b[0];
  W(1, 0) = b[0];
  W(0, 2) = b[1];
  W(2, 0) = -b[1];
  W(1, 2) = b[2];
  W(2, 1) = -b[2];
  return W;
}

Vec3 two_form_from_matrix(const Mat3& W) {
  return {0.5 * (W(1, 0) - W(0, 1)), 0.5 * (W(0, 2) - W(2, 0)), 0.5 * (W(1, 2) - W(2, 1))};
}

Vec3 two_form_dual(const Vec3& b) { return {b[2], -b[1], -b[0]}; }

Vec3 two_form_from_dual(const Vec3& w) { return {-w[2], -w[1], w[0]}; }

double two_form_apply(const Vec3& b, const Vec3& U, const Vec3& V) {
  return U.dot(two_form_matrix(b) * V);
}

Vec3 interior(const Vec3& b, const Vec3& V) { return two_form_dual(b).cross(V); }

// ---------------------------------------------------------------------------

TwoForm flux_form(const VectorField& B, const VolumeForm& omega) {
  TwoForm beta;
  beta.eval = [B, rho = omega.rho](const Point& p) { return two_form_from_dual(rho(p) * B(p)); };
  return beta;
}

VectorField lie_bracket(const VectorField& V, const VectorField& W) {
  VectorField out;
  out.eval = [V, W](const Point& p) -> Vec3 { return W.jac(p) * V(p) - V.jac(p) * W(p); };
  out.fd_step = std::max(V.fd_step, W.fd_step);
  return out;
}

ScalarField divergence(const VectorField& V, const VolumeForm& omega) {
  ScalarField out;
  out.value = [V, rho = omega.rho](const Point& p) {
    return V.jac(p).trace() + rho.grad(p).dot(V(p)) / rho(p);
  };
  return out;
}

OneForm contract(const VectorField& V, const TwoForm& beta) {
  OneForm out;
  out.eval = [V, beta](const Point& p) { return interior(beta(p), V(p)); };
  return out;
}

TwoForm exterior_derivative(const OneForm& a) {
  TwoForm out;
  out.eval = [a](const Point& p) -> Vec3 {
    const Mat3 J = a.jac(p);
    return {J(0, 1) - J(1, 0), J(2, 0) - J(0, 2), J(2, 1) - J(1, 2)};
  };
  return out;
}

ScalarField exterior_derivative(const TwoForm& beta) {
  ScalarField out;
  out.value = [beta](const Point& p) {
    auto w = [&beta](const Point& q) { return two_form_dual(beta(q)); };
    return fd_jacobian(w, p, beta.fd_step).trace();
  };
  return out;
}

OneForm flat(const VectorField& V, const Metric& g) {
  OneForm out;
  out.eval = [V, g](const Point& p) -> Vec3 { return g(p) * V(p); };
  return out;
}

OneForm exact_form(const ScalarField& f) {
  OneForm out;
  out.eval = [f](const Point& p) { return f.grad(p); };
  out.jacobian = [f](const Point& p) { return f.hess(p); };
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Point> sample_points(std::size_t n, double r_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = r_max * std::sqrt(u01(rng));
    const double th = kTwoPi * u01(rng);
    const double ph = kTwoPi * u01(rng);
    pts.push_back({r * std::cos(th), r * std::sin(th), ph});
  }
  return pts;
}

std::vector<Point> grid_points(const std::vector<double>& radii, int n_theta, int n_phi) {
  std::vector<Point> pts;
  pts.reserve(radii.size() * n_theta * n_phi);
  for (double r : radii)
    for (int i = 0; i < n_theta; ++i)
      for (int k = 0; k < n_phi; ++k) {
        const double th = kTwoPi * i / n_theta;
        pts.push_back({r * std::cos(th), r * std::sin(th), kTwoPi * k / n_phi});
      }
  return pts;
}

ResidualReport integrability_residuals(const IntegrableSystem& sys, const std::vector<Point>& samples) {
  if (samples.empty())
    throw Error(ErrorCode::EmptySampleSet, "field_core", "integrability_residuals needs samples");
  ResidualReport rep;
  rep.n_samples = samples.size();
  const VectorField br = lie_bracket(sys.B, sys.J);
  const TwoForm beta = flux_form(sys.B, sys.omega);
  for (const auto& pt : samples) {
    const double c = max_abs(br(pt));
    if (c >= rep.max_commutator) {
      rep.max_commutator = c;
      rep.argmax_commutator = pt;
    }
    const double d = max_abs(interior(beta(pt), sys.J(pt)) + sys.p.grad(pt));
    if (d >= rep.max_ijbeta_dp) {
      rep.max_ijbeta_dp = d;
      rep.argmax_ijbeta_dp = pt;
    }
  }
  if (sys.metric) {
    rep.has_mhs = true;
    rep.max_mhs = mhs_residual(sys, samples);
  }
  return rep;
}

double mhs_residual(const IntegrableSystem& sys, const std::vector<Point>& samples) {
  if (!sys.metric) throw Error(ErrorCode::MissingMetric, "field_core", "MHS residual needs a metric");
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "field_core", "mhs_residual needs samples");
  const TwoForm curl_b = exterior_derivative(flat(sys.B, *sys.metric));
  const TwoForm j = flux_form(sys.J, sys.omega);
  double m = 0.0;
  for (const auto& pt : samples) m = std::max(m, max_abs(j(pt) - curl_b(pt)));
  return m;
}

LemmaReport lemma_checks(const IntegrableSystem& sys, const std::vector<Point>& samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "field_core", "lemma_checks needs samples");
  LemmaReport rep;
  const TwoForm beta = flux_form(sys.B, sys.omega);
  const TwoForm jform = flux_form(sys.J, sys.omega);
  const ScalarField dbeta = exterior_derivative(beta);
  const ScalarField divB = divergence(sys.B, sys.omega);
  const ScalarField divJ = divergence(sys.J, sys.omega);
  const VectorField br = lie_bracket(sys.B, sys.J);
  std::optional<TwoForm> da, dk;
  if (sys.alpha) da = exterior_derivative(*sys.alpha);
  if (sys.kappa) dk = exterior_derivative(*sys.kappa);
  for (const auto& pt : samples) {
    const Vec3 gp = sys.p.grad(pt);
    const Vec3 B = sys.B(pt);
    const double rho = sys.omega.rho(pt);
    rep.beta_closed = std::max(rep.beta_closed, std::abs(dbeta(pt)));
    rep.b_dot_grad_p = std::max(rep.b_dot_grad_p, std::abs(B.dot(gp)));
    rep.j_dot_grad_p = std::max(rep.j_dot_grad_p, std::abs(sys.J(pt).dot(gp)));
    if (da) rep.alpha_potential = std::max(rep.alpha_potential, max_abs((*da)(pt) - beta(pt)));
    if (dk) rep.kappa_potential = std::max(rep.kappa_potential, max_abs((*dk)(pt) - jform(pt)));
    const double dj = divJ(pt);
    rep.div_B = std::max(rep.div_B, std::abs(divB(pt)));
    rep.div_J = std::max(rep.div_J, std::abs(dj));
    // dual vectors of i_[B,J] Omega and (div J) beta
    rep.bracket_identity = std::max(rep.bracket_identity, max_abs(rho * br(pt) - dj * rho * B));
  }
  return rep;
}

}  // namespace ifield
