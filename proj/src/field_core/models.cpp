#include <cmath>

#include "ifield/field_core.hpp"

namespace ifield {

namespace {

ScalarField constant_density() {
  ScalarField rho;
  rho.value = [](const Point&) { return 1.0; };
  rho.gradient = [](const Point&) { return Vec3::Zero().eval(); };
  return rho;
}

void check_finite(const ModelSpec& s) {
  for (double v : {s.iota0, s.iota2, s.a0, s.rho_eps, s.p0, s.k})
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidParameter, "field_core", "model parameters must be finite");
}

IntegrableSystem model_a(const ModelSpec& s) {
  if (s.a0 != 0.0 && s.rho_eps != 0.0)
    throw Error(ErrorCode::InvalidParameter, "field_core", "model A: a0 requires rho_eps = 0");
  if (std::abs(s.rho_eps) >= 1.0)
    throw Error(ErrorCode::InvalidParameter, "field_core", "model A: |rho_eps| must be < 1");
  if (std::abs(std::abs(2.0 * std::cos(kTwoPi * s.iota0)) - 2.0) < 1e-6)
    throw Error(ErrorCode::InvalidParameter, "field_core", "model A: degenerate axis, |tr M| = 2",
                "iota0=" + std::to_string(s.iota0));
  const double i0 = s.iota0, i2 = s.iota2, a0 = s.a0, re = s.rho_eps;
  auto rho = [re](double phi) { return 1.0 + re * std::cos(phi); };
  auto drho = [re](double phi) { return -re * std::sin(phi); };

  IntegrableSystem sys;
  sys.label = "A";
  sys.B.eval = [=](const Point& q) -> Vec3 {
    const double iota = i0 + i2 * 0.5 * (q.x * q.x + q.y * q.y);
    return Vec3(-iota * q.y, iota * q.x, 1.0) / rho(q.phi);
  };
  sys.B.jacobian = [=](const Point& q) -> Mat3 {
    const double iota = i0 + i2 * 0.5 * (q.x * q.x + q.y * q.y);
    const double r = rho(q.phi);
    Mat3 J = Mat3::Zero();
    J(0, 0) = -i2 * q.x * q.y;
    J(0, 1) = -iota - i2 * q.y * q.y;
    J(1, 0) = iota + i2 * q.x * q.x;
    J(1, 1) = i2 * q.x * q.y;
    J /= r;
    const Vec3 v = Vec3(-iota * q.y, iota * q.x, 1.0);
    J.col(2) = -drho(q.phi) / (r * r) * v;
    return J;
  };
  sys.J.eval = [=](const Point& q) -> Vec3 {
    const double iota = i0 + i2 * 0.5 * (q.x * q.x + q.y * q.y);
    const double c = 1.0 + iota * a0;
    return Vec3(-c * q.y, c * q.x, a0);
  };
  sys.J.jacobian = [=](const Point& q) -> Mat3 {
    const double iota = i0 + i2 * 0.5 * (q.x * q.x + q.y * q.y);
    const double c = 1.0 + iota * a0;
    Mat3 J = Mat3::Zero();
    J(0, 0) = -a0 * i2 * q.x * q.y;
    J(0, 1) = -c - a0 * i2 * q.y * q.y;
    J(1, 0) = c + a0 * i2 * q.x * q.x;
    J(1, 1) = a0 * i2 * q.x * q.y;
    return J;
  };
  sys.p.value = [](const Point& q) { return 0.5 * (q.x * q.x + q.y * q.y); };
  sys.p.gradient = [](const Point& q) { return Vec3(q.x, q.y, 0.0); };
  sys.p.hessian = [](const Point&) {
    Mat3 H = Mat3::Zero();
    H(0, 0) = H(1, 1) = 1.0;
    return H;
  };
  sys.omega.rho.value = [=](const Point& q) { return rho(q.phi); };
  sys.omega.rho.gradient = [=](const Point& q) { return Vec3(0.0, 0.0, drho(q.phi)); };

  OneForm alpha;
  alpha.eval = [=](const Point& q) -> Vec3 {
    const double psi = 0.5 * (q.x * q.x + q.y * q.y);
    return Vec3(-0.5 * q.y, 0.5 * q.x, -(i0 * psi + 0.5 * i2 * psi * psi));
  };
  sys.alpha = alpha;
  OneForm kappa;
  if (a0 == 0.0) {
    kappa.eval = [=](const Point& q) -> Vec3 {
      return Vec3(0.0, 0.0, -0.5 * (q.x * q.x + q.y * q.y) * rho(q.phi));
    };
  } else {
    kappa.eval = [=](const Point& q) -> Vec3 {
      const double psi = 0.5 * (q.x * q.x + q.y * q.y);
      const double PsiP = i0 * psi + 0.5 * i2 * psi * psi;
      return Vec3(-0.5 * a0 * q.y, 0.5 * a0 * q.x, -(psi + a0 * PsiP));
    };
  }
  sys.kappa = kappa;
  sys.metric = euclidean_metric();
  return sys;
}

IntegrableSystem model_a_mhs(const ModelSpec& s) {
  if (std::abs(std::abs(2.0 * std::cos(kTwoPi * s.iota0)) - 2.0) < 1e-6)
    throw Error(ErrorCode::InvalidParameter, "field_core", "model A-MHS: degenerate axis, |tr M| = 2");
  const double i0 = s.iota0, p0 = s.p0;
  IntegrableSystem sys;
  sys.label = "A-MHS";
  sys.B.eval = [=](const Point& q) { return Vec3(-i0 * q.y, i0 * q.x, 1.0); };
  sys.B.jacobian = [=](const Point&) {
    Mat3 J = Mat3::Zero();
    J(0, 1) = -i0;
    J(1, 0) = i0;
    return J;
  };
  sys.J.eval = [=](const Point&) { return Vec3(0.0, 0.0, 2.0 * i0); };
  sys.J.jacobian = [](const Point&) { return Mat3::Zero().eval(); };
  sys.p.value = [=](const Point& q) { return p0 - i0 * i0 * (q.x * q.x + q.y * q.y); };
  sys.p.gradient = [=](const Point& q) { return Vec3(-2.0 * i0 * i0 * q.x, -2.0 * i0 * i0 * q.y, 0.0); };
  sys.p.hessian = [=](const Point&) {
    Mat3 H = Mat3::Zero();
    H(0, 0) = H(1, 1) = -2.0 * i0 * i0;
    return H;
  };
  sys.omega.rho = constant_density();
  OneForm alpha;
  alpha.eval = [=](const Point& q) {
    return Vec3(-0.5 * q.y, 0.5 * q.x, -i0 * 0.5 * (q.x * q.x + q.y * q.y));
  };
  sys.alpha = alpha;
  OneForm kappa;
  kappa.eval = [=](const Point& q) { return Vec3(-i0 * q.y, i0 * q.x, 0.0); };
  sys.kappa = kappa;
  sys.metric = euclidean_metric();
  return sys;
}

IntegrableSystem model_b(const ModelSpec& s) {
  if (s.k == 0.0) throw Error(ErrorCode::InvalidParameter, "field_core", "model B requires k != 0");
  const double k = s.k;
  IntegrableSystem sys;
  sys.label = "B";
  sys.B.eval = [=](const Point& q) { return Vec3(k * q.x, -k * q.y, 1.0); };
  sys.B.jacobian = [=](const Point&) {
    Mat3 J = Mat3::Zero();
    J(0, 0) = k;
    J(1, 1) = -k;
    return J;
  };
  sys.J.eval = [](const Point&) { return Vec3(0.0, 0.0, 1.0); };
  sys.J.jacobian = [](const Point&) { return Mat3::Zero().eval(); };
  sys.p.value = [=](const Point& q) { return k * q.x * q.y; };
  sys.p.gradient = [=](const Point& q) { return Vec3(k * q.y, k * q.x, 0.0); };
  sys.p.hessian = [=](const Point&) {
    Mat3 H = Mat3::Zero();
    H(0, 1) = H(1, 0) = k;
    return H;
  };
  sys.omega.rho = constant_density();
  OneForm alpha;
  alpha.eval = [=](const Point& q) { return Vec3(-0.5 * q.y, 0.5 * q.x, k * q.x * q.y); };
  sys.alpha = alpha;
  OneForm kappa;
  kappa.eval = [](const Point& q) { return Vec3(-0.5 * q.y, 0.5 * q.x, 0.0); };
  sys.kappa = kappa;
  sys.metric = euclidean_metric();
  return sys;
}

IntegrableSystem model_c(const ModelSpec& s) {
  if (s.k == 0.0) throw Error(ErrorCode::InvalidParameter, "field_core", "model C requires k != 0");
  const double k = s.k;
  IntegrableSystem sys;
  sys.label = "C";
  sys.B.eval = [=](const Point& q) {
    const double c = std::cos(q.phi), sn = std::sin(q.phi);
    return Vec3(k * (c * q.x + sn * q.y) - 0.5 * q.y, k * (sn * q.x - c * q.y) + 0.5 * q.x, 1.0);
  };
  sys.B.jacobian = [=](const Point& q) {
    const double c = std::cos(q.phi), sn = std::sin(q.phi);
    Mat3 J = Mat3::Zero();
    J(0, 0) = k * c;
    J(0, 1) = k * sn - 0.5;
    J(0, 2) = k * (-sn * q.x + c * q.y);
    J(1, 0) = k * sn + 0.5;
    J(1, 1) = -k * c;
    J(1, 2) = k * (c * q.x + sn * q.y);
    return J;
  };
  sys.J.eval = [](const Point& q) { return Vec3(-0.5 * q.y, 0.5 * q.x, 1.0); };
  sys.J.jacobian = [](const Point&) {
    Mat3 J = Mat3::Zero();
    J(0, 1) = -0.5;
    J(1, 0) = 0.5;
    return J;
  };
  sys.p.value = [=](const Point& q) {
    const double c = std::cos(q.phi), sn = std::sin(q.phi);
    return 0.5 * k * (-sn * q.x * q.x + 2.0 * c * q.x * q.y + sn * q.y * q.y);
  };
  sys.p.gradient = [=](const Point& q) {
    const double c = std::cos(q.phi), sn = std::sin(q.phi);
    return Vec3(k * (-sn * q.x + c * q.y), k * (c * q.x + sn * q.y),
                0.5 * k * (-c * q.x * q.x - 2.0 * sn * q.x * q.y + c * q.y * q.y));
  };
  sys.p.hessian = [=](const Point& q) {
    const double c = std::cos(q.phi), sn = std::sin(q.phi);
    Mat3 H;
    H << -k * sn, k * c, k * (-c * q.x - sn * q.y),
         k * c, k * sn, k * (-sn * q.x + c * q.y),
         k * (-c * q.x - sn * q.y), k * (-sn * q.x + c * q.y),
         0.5 * k * (sn * q.x * q.x - 2.0 * c * q.x * q.y - sn * q.y * q.y);
    return H;
  };
  sys.omega.rho = constant_density();
  auto kappa_eval = [](const Point& q) {
    return Vec3(-0.5 * q.y, 0.5 * q.x, -0.25 * (q.x * q.x + q.y * q.y));
  };
  OneForm alpha;
  alpha.eval = [=, p = sys.p](const Point& q) -> Vec3 {
    return kappa_eval(q) + Vec3(0.0, 0.0, p(q));
  };
  sys.alpha = alpha;
  OneForm kappa;
  kappa.eval = kappa_eval;
  sys.kappa = kappa;
  sys.metric = euclidean_metric();
  return sys;
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  if (name == "A") return ModelKind::A;
  if (name == "A-MHS" || name == "A_MHS") return ModelKind::A_MHS;
  if (name == "B") return ModelKind::B;
  if (name == "C") return ModelKind::C;
  throw Error(ErrorCode::UnknownModel, "field_core", "unknown model '" + name + "'", "system.model");
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::A: return "A";
    case ModelKind::A_MHS: return "A-MHS";
    case ModelKind::B: return "B";
    case ModelKind::C: return "C";
  }
  return "?";
}

IntegrableSystem make_model(const ModelSpec& spec) {
  check_finite(spec);
  switch (spec.kind) {
    case ModelKind::A: return model_a(spec);
    case ModelKind::A_MHS: return model_a_mhs(spec);
    case ModelKind::B: return model_b(spec);
    case ModelKind::C: return model_c(spec);
  }
  throw Error(ErrorCode::UnknownModel, "field_core", "unknown model kind");
}

}  // namespace ifield
