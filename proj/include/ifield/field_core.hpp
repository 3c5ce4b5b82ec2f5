#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ifield/core.hpp"

namespace ifield {

// ---------------------------------------------------------------------------
// Field representations. Every field is a pointwise evaluator in the chart
// (x, y, phi). Derivatives are analytic when supplied and otherwise fall back
// to 4th-order central differences with step fd_step.

inline constexpr double kDefaultFdStep = 1e-4;

struct ScalarField {
  std::function<double(const Point&)> value;
  std::function<Vec3(const Point&)> gradient;  // optional
  std::function<Mat3(const Point&)> hessian;   // optional
  double fd_step = kDefaultFdStep;

  explicit operator bool() const { return static_cast<bool>(value); }
  double operator()(const Point& p) const { return value(p); }
  Vec3 grad(const Point& p) const;
  Mat3 hess(const Point& p) const;
};

// Vector field V = V^x d_x + V^y d_y + V^phi d_phi.
struct VectorField {
  std::function<Vec3(const Point&)> eval;
  std::function<Mat3(const Point&)> jacobian;  // optional, J(i,j) = d V^i / d x^j
  double fd_step = kDefaultFdStep;

  explicit operator bool() const { return static_cast<bool>(eval); }
  Vec3 operator()(const Point& p) const { return eval(p); }
  Mat3 jac(const Point& p) const;
};

// One-form a = a_x dx + a_y dy + a_phi dphi.
struct OneForm {
  std::function<Vec3(const Point&)> eval;
  std::function<Mat3(const Point&)> jacobian;  // optional, J(i,j) = d a_i / d x^j
  double fd_step = kDefaultFdStep;

  explicit operator bool() const { return static_cast<bool>(eval); }
  Vec3 operator()(const Point& p) const { return eval(p); }
  Mat3 jac(const Point& p) const;
};

// Two-form beta = b_yx dy^dx + b_xphi dx^dphi + b_yphi dy^dphi, stored as
// (b_yx, b_xphi, b_yphi).
struct TwoForm {
  std::function<Vec3(const Point&)> eval;
  double fd_step = kDefaultFdStep;

  explicit operator bool() const { return static_cast<bool>(eval); }
  Vec3 operator()(const Point& p) const { return eval(p); }
};

// Omega = rho dx^dy^dphi.
struct VolumeForm {
  ScalarField rho;
  double floor = 1e-12;
};

struct Metric {
  std::function<Mat3(const Point&)> g;
  explicit operator bool() const { return static_cast<bool>(g); }
  Mat3 operator()(const Point& p) const { return g(p); }
};

Metric euclidean_metric();

// Two-form algebra. W is the antisymmetric matrix with beta(U, V) = U^T W V;
// w is the dual vector with beta = i_w (dx^dy^dphi).
Mat3 two_form_matrix(const Vec3& b);
Vec3 two_form_from_matrix(const Mat3& W);
Vec3 two_form_dual(const Vec3& b);
Vec3 two_form_from_dual(const Vec3& w);
// beta(U, V)
double two_form_apply(const Vec3& b, const Vec3& U, const Vec3& V);
// i_V beta as a covector
Vec3 interior(const Vec3& b, const Vec3& V);

// ---------------------------------------------------------------------------
// Integrable system (B, J, p, Omega) with optional potentials and metric.

struct IntegrableSystem {
  std::string label;
  VectorField B;
  VectorField J;
  ScalarField p;
  VolumeForm omega;
  std::optional<OneForm> alpha;  // d alpha = i_B Omega
  std::optional<OneForm> kappa;  // d kappa = i_J Omega
  std::optional<Metric> metric;
};

struct ResidualReport {
  double max_commutator = 0.0;
  double max_ijbeta_dp = 0.0;
  double max_mhs = 0.0;
  bool has_mhs = false;
  Point argmax_commutator{};
  Point argmax_ijbeta_dp{};
  std::size_t n_samples = 0;
};

// Elementary operations.
TwoForm flux_form(const VectorField& B, const VolumeForm& omega);
VectorField lie_bracket(const VectorField& V, const VectorField& W);
ScalarField divergence(const VectorField& V, const VolumeForm& omega);
OneForm contract(const VectorField& V, const TwoForm& beta);
TwoForm exterior_derivative(const OneForm& a);
// Coefficient of d beta with respect to dx^dy^dphi.
ScalarField exterior_derivative(const TwoForm& beta);
OneForm flat(const VectorField& V, const Metric& g);
OneForm exact_form(const ScalarField& f);

// Uniform samples in the disk of radius r_max times [0, 2pi), seeded.
std::vector<Point> sample_points(std::size_t n, double r_max, std::uint64_t seed);
// Tensor grid of radii, angles and toroidal angles.
std::vector<Point> grid_points(const std::vector<double>& radii, int n_theta, int n_phi);

ResidualReport integrability_residuals(const IntegrableSystem& sys, const std::vector<Point>& samples);
double mhs_residual(const IntegrableSystem& sys, const std::vector<Point>& samples);

// Preconditions of the lemma suite, each as a max residual over samples.
struct LemmaReport {
  double beta_closed = 0.0;         // |d beta|
  double b_dot_grad_p = 0.0;        // |B . grad p|
  double j_dot_grad_p = 0.0;        // |J . grad p|
  double alpha_potential = 0.0;     // |d alpha - beta|, if alpha present
  double kappa_potential = 0.0;     // |d kappa - i_J Omega|, if kappa present
  double div_B = 0.0;               // |div_Omega B|
  double div_J = 0.0;               // |div_Omega J|
  double bracket_identity = 0.0;    // |i_[B,J] Omega - (div J) beta|
};

LemmaReport lemma_checks(const IntegrableSystem& sys, const std::vector<Point>& samples);

// ---------------------------------------------------------------------------
// Diffeomorphisms of the solid torus preserving phi-periodicity.

struct LocalFrame {
  Point old_point;  // preimage of the new point
  Mat3 d_forward;   // d(new)/d(old) at old_point
  Mat3 d_inverse;   // d(old)/d(new) at the new point
};

class Diffeo {
 public:
  virtual ~Diffeo() = default;
  virtual Point forward(const Point& x) const = 0;
  virtual Point inverse(const Point& y) const = 0;
  // Jacobian of forward at the old point x.
  virtual Mat3 jacobian(const Point& x) const = 0;
  // Preimage and both Jacobians at the new point y.
  virtual LocalFrame at_new(const Point& y) const;
  virtual std::string describe() const { return "diffeo"; }
};

using DiffeoPtr = std::shared_ptr<const Diffeo>;

// (x, y, phi) -> (M(phi) (x, y) + t(phi), phi)
class AffinePhiMap : public Diffeo {
 public:
  struct Data {
    Mat2 M;
    Mat2 dM;
    Vec2 t;
    Vec2 dt;
  };
  using Generator = std::function<Data(double)>;

  AffinePhiMap(Generator gen, std::string name);
  Point forward(const Point& x) const override;
  Point inverse(const Point& y) const override;
  Mat3 jacobian(const Point& x) const override;
  LocalFrame at_new(const Point& y) const override;
  std::string describe() const override { return name_; }
  Data data(double phi) const { return gen_(phi); }

 private:
  Generator gen_;
  std::string name_;
};

// (x, y) -> (x, y) (1 + eps r^2)
class RadialStretch : public Diffeo {
 public:
  explicit RadialStretch(double eps);
  Point forward(const Point& x) const override;
  Point inverse(const Point& y) const override;
  Mat3 jacobian(const Point& x) const override;
  std::string describe() const override { return "radial_stretch"; }

 private:
  double eps_;
};

// Applies maps[0] first.
class CompositeDiffeo : public Diffeo {
 public:
  explicit CompositeDiffeo(std::vector<DiffeoPtr> maps);
  Point forward(const Point& x) const override;
  Point inverse(const Point& y) const override;
  Mat3 jacobian(const Point& x) const override;
  LocalFrame at_new(const Point& y) const override;
  std::string describe() const override;
  const std::vector<DiffeoPtr>& maps() const { return maps_; }

 private:
  std::vector<DiffeoPtr> maps_;
};

class InverseDiffeo : public Diffeo {
 public:
  explicit InverseDiffeo(DiffeoPtr base) : base_(std::move(base)) {}
  Point forward(const Point& x) const override { return base_->inverse(x); }
  Point inverse(const Point& y) const override { return base_->forward(y); }
  Mat3 jacobian(const Point& x) const override;
  LocalFrame at_new(const Point& y) const override;
  std::string describe() const override { return "inverse(" + base_->describe() + ")"; }

 private:
  DiffeoPtr base_;
};

DiffeoPtr make_identity();
DiffeoPtr make_wobble(double amplitude);
DiffeoPtr make_translation(double tx, double ty);
DiffeoPtr make_rotation(int m, double theta0);
DiffeoPtr make_shear(double s0, double eps, int n);
DiffeoPtr make_radial_stretch(double eps);
DiffeoPtr compose(std::vector<DiffeoPtr> maps);

// Transport every component of the system through the map.
IntegrableSystem pushforward(const IntegrableSystem& sys, DiffeoPtr map);

// Component transports at a single new point.
Vec3 push_vector(const LocalFrame& f, const Vec3& v_old);
Vec3 pull_covector(const LocalFrame& f, const Vec3& a_old);
Vec3 pull_two_form(const LocalFrame& f, const Vec3& b_old);

// ---------------------------------------------------------------------------
// Analytic models.

enum class ModelKind { A, A_MHS, B, C };

struct ModelSpec {
  ModelKind kind = ModelKind::A;
  double iota0 = 0.3;
  double iota2 = 0.1;
  double a0 = 0.0;
  double rho_eps = 0.0;
  double p0 = 0.0;
  double k = 0.1;
};

ModelKind parse_model_kind(const std::string& name);
std::string model_name(ModelKind kind);
IntegrableSystem make_model(const ModelSpec& spec);

}  // namespace ifield
