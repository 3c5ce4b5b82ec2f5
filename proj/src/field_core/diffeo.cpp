#include <cmath>
#include <sstream>

#include "ifield/field_core.hpp"

namespace ifield {

namespace {

Mat3 checked_inverse(const Mat3& J, const char* what) {
  const double det = J.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-14)
    throw Error(ErrorCode::NonInvertibleJacobian, "field_core",
                std::string("non-invertible Jacobian in ") + what, "det=" + std::to_string(det));
  return J.inverse();
}

Mat2 rot(double a) {
  Mat2 R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

}  // namespace

LocalFrame Diffeo::at_new(const Point& y) const {
  LocalFrame f;
  f.old_point = inverse(y);
  f.d_forward = jacobian(f.old_point);
  f.d_inverse = checked_inverse(f.d_forward, "at_new");
  return f;
}

// ---------------------------------------------------------------------------

AffinePhiMap::AffinePhiMap(Generator gen, std::string name) : gen_(std::move(gen)), name_(std::move(name)) {}

Point AffinePhiMap::forward(const Point& x) const {
  const Data d = gen_(x.phi);
  const Vec2 v = d.M * Vec2(x.x, x.y) + d.t;
  return {v[0], v[1], x.phi};
}

Point AffinePhiMap::inverse(const Point& y) const {
  const Data d = gen_(y.phi);
  const Vec2 v = d.M.inverse() * (Vec2(y.x, y.y) - d.t);
  return {v[0], v[1], y.phi};
}

Mat3 AffinePhiMap::jacobian(const Point& x) const {
  const Data d = gen_(x.phi);
  Mat3 J = Mat3::Zero();
  J.topLeftCorner<2, 2>() = d.M;
  J.block<2, 1>(0, 2) = d.dM * Vec2(x.x, x.y) + d.dt;
  J(2, 2) = 1.0;
  return J;
}

LocalFrame AffinePhiMap::at_new(const Point& y) const {
  const Data d = gen_(y.phi);
  const double det = d.M.determinant();
  if (std::abs(det) < 1e-14)
    throw Error(ErrorCode::NonInvertibleJacobian, "field_core", "singular affine map", name_);
  const Mat2 Minv = d.M.inverse();
  const Vec2 xy = Minv * (Vec2(y.x, y.y) - d.t);
  LocalFrame f;
  f.old_point = {xy[0], xy[1], y.phi};
  f.d_forward = Mat3::Zero();
  f.d_forward.topLeftCorner<2, 2>() = d.M;
  f.d_forward.block<2, 1>(0, 2) = d.dM * xy + d.dt;
  f.d_forward(2, 2) = 1.0;
  f.d_inverse = Mat3::Zero();
  f.d_inverse.topLeftCorner<2, 2>() = Minv;
  f.d_inverse.block<2, 1>(0, 2) = -Minv * f.d_forward.block<2, 1>(0, 2);
  f.d_inverse(2, 2) = 1.0;
  return f;
}

// ---------------------------------------------------------------------------

RadialStretch::RadialStretch(double eps) : eps_(eps) {
  if (eps < 0.0)
    throw Error(ErrorCode::InvalidParameter, "field_core", "radial stretch requires eps >= 0");
}

Point RadialStretch::forward(const Point& x) const {
  const double s = 1.0 + eps_ * (x.x * x.x + x.y * x.y);
  return {x.x * s, x.y * s, x.phi};
}

Point RadialStretch::inverse(const Point& y) const {
  const double R = std::hypot(y.x, y.y);
  if (R == 0.0) return y;
  double r = R;
  for (int it = 0; it < 100; ++it) {
    const double f = r + eps_ * r * r * r - R;
    const double dr = f / (1.0 + 3.0 * eps_ * r * r);
    r -= dr;
    if (std::abs(dr) <= 1e-16 * (1.0 + R)) break;
  }
  const double s = r / R;
  return {y.x * s, y.y * s, y.phi};
}

Mat3 RadialStretch::jacobian(const Point& x) const {
  const Vec2 v(x.x, x.y);
  Mat3 J = Mat3::Zero();
  J.topLeftCorner<2, 2>() = (1.0 + eps_ * v.squaredNorm()) * Mat2::Identity() + 2.0 * eps_ * v * v.transpose();
  J(2, 2) = 1.0;
  return J;
}

// ---------------------------------------------------------------------------

CompositeDiffeo::CompositeDiffeo(std::vector<DiffeoPtr> maps) : maps_(std::move(maps)) {}

Point CompositeDiffeo::forward(const Point& x) const {
  Point p = x;
  for (const auto& m : maps_) p = m->forward(p);
  return p;
}

Point CompositeDiffeo::inverse(const Point& y) const {
  Point p = y;
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) p = (*it)->inverse(p);
  return p;
}

Mat3 CompositeDiffeo::jacobian(const Point& x) const {
  Mat3 J = Mat3::Identity();
  Point p = x;
  for (const auto& m : maps_) {
    J = m->jacobian(p) * J;
    p = m->forward(p);
  }
  return J;
}

LocalFrame CompositeDiffeo::at_new(const Point& y) const {
  LocalFrame acc{y, Mat3::Identity(), Mat3::Identity()};
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) {
    const LocalFrame f = (*it)->at_new(acc.old_point);
    acc.d_forward = acc.d_forward * f.d_forward;
    acc.d_inverse = f.d_inverse * acc.d_inverse;
    acc.old_point = f.old_point;
  }
  return acc;
}

std::string CompositeDiffeo::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < maps_.size(); ++i) os << (i ? "+" : "") << maps_[i]->describe();
  return os.str();
}

Mat3 InverseDiffeo::jacobian(const Point& x) const { return base_->at_new(x).d_inverse; }

LocalFrame InverseDiffeo::at_new(const Point& y) const {
  LocalFrame f;
  f.old_point = base_->forward(y);
  f.d_inverse = base_->jacobian(y);
  f.d_forward = checked_inverse(f.d_inverse, "inverse map");
  return f;
}

// ---------------------------------------------------------------------------

DiffeoPtr make_identity() {
  return std::make_shared<AffinePhiMap>(
      [](double) { return AffinePhiMap::Data{Mat2::Identity(), Mat2::Zero(), Vec2::Zero(), Vec2::Zero()}; },
      "identity");
}

DiffeoPtr make_wobble(double a) {
  return std::make_shared<AffinePhiMap>(
      [a](double phi) {
        return AffinePhiMap::Data{Mat2::Identity(), Mat2::Zero(), Vec2(a * std::cos(phi), a * std::sin(phi)),
                                  Vec2(-a * std::sin(phi), a * std::cos(phi))};
      },
      "wobble");
}

DiffeoPtr make_translation(double tx, double ty) {
  return std::make_shared<AffinePhiMap>(
      [tx, ty](double) { return AffinePhiMap::Data{Mat2::Identity(), Mat2::Zero(), Vec2(tx, ty), Vec2::Zero()}; },
      "translation");
}

DiffeoPtr make_rotation(int m, double theta0) {
  return std::make_shared<AffinePhiMap>(
      [m, theta0](double phi) {
        const double a = theta0 + m * phi;
        Mat2 dR;
        dR << -std::sin(a), -std::cos(a), std::cos(a), -std::sin(a);
        return AffinePhiMap::Data{rot(a), m * dR, Vec2::Zero(), Vec2::Zero()};
      },
      "rotation");
}

DiffeoPtr make_shear(double s0, double eps, int n) {
  return std::make_shared<AffinePhiMap>(
      [s0, eps, n](double phi) {
        Mat2 M, dM;
        M << 1.0, s0 + eps * std::sin(n * phi), 0.0, 1.0;
        dM << 0.0, eps * n * std::cos(n * phi), 0.0, 0.0;
        return AffinePhiMap::Data{M, dM, Vec2::Zero(), Vec2::Zero()};
      },
      "shear");
}

DiffeoPtr make_radial_stretch(double eps) { return std::make_shared<RadialStretch>(eps); }

DiffeoPtr compose(std::vector<DiffeoPtr> maps) {
  if (maps.empty()) return make_identity();
  if (maps.size() == 1) return maps.front();
  return std::make_shared<CompositeDiffeo>(std::move(maps));
}

// ---------------------------------------------------------------------------

Vec3 push_vector(const LocalFrame& f, const Vec3& v) { return f.d_forward * v; }
Vec3 pull_covector(const LocalFrame& f, const Vec3& a) { return f.d_inverse.transpose() * a; }
Vec3 pull_two_form(const LocalFrame& f, const Vec3& b) {
  return two_form_from_matrix(f.d_inverse.transpose() * two_form_matrix(b) * f.d_inverse);
}

IntegrableSystem pushforward(const IntegrableSystem& sys, DiffeoPtr map) {
  auto S = std::make_shared<const IntegrableSystem>(sys);
  IntegrableSystem out;
  out.label = sys.label + "|" + map->describe();

  auto push_field = [S, map](VectorField IntegrableSystem::*member) {
    VectorField v;
    v.eval = [S, map, member](const Point& y) -> Vec3 {
      const LocalFrame f = map->at_new(y);
      return f.d_forward * ((*S).*member)(f.old_point);
    };
    return v;
  };
  out.B = push_field(&IntegrableSystem::B);
  out.J = push_field(&IntegrableSystem::J);

  out.p.value = [S, map](const Point& y) { return S->p(map->inverse(y)); };
  out.p.gradient = [S, map](const Point& y) -> Vec3 {
    const LocalFrame f = map->at_new(y);
    return f.d_inverse.transpose() * S->p.grad(f.old_point);
  };

  out.omega.floor = sys.omega.floor;
  out.omega.rho.value = [S, map](const Point& y) {
    const LocalFrame f = map->at_new(y);
    return S->omega.rho(f.old_point) * f.d_inverse.determinant();
  };

  auto push_form = [S, map](const OneForm& a) {
    OneForm o;
    o.eval = [a, map](const Point& y) -> Vec3 {
      const LocalFrame f = map->at_new(y);
      return f.d_inverse.transpose() * a(f.old_point);
    };
    return o;
  };
  if (sys.alpha) out.alpha = push_form(*sys.alpha);
  if (sys.kappa) out.kappa = push_form(*sys.kappa);
  if (sys.metric) {
    Metric g = *sys.metric;
    out.metric = Metric{[g, map](const Point& y) -> Mat3 {
      const LocalFrame f = map->at_new(y);
      return f.d_inverse.transpose() * g(f.old_point) * f.d_inverse;
    }};
  }
  return out;
}

}  // namespace ifield
