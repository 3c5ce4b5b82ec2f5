#include "ifield/numerics.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/Splines>

namespace ifield {

// ---------------------------------------------------------------------------
// PeriodicSeries

PeriodicSeries::PeriodicSeries(const std::vector<Eigen::VectorXd>& samples, double period)
    : n_(static_cast<int>(samples.size())), period_(period) {
  if (n_ == 0) return;
  dim_ = static_cast<int>(samples[0].size());
  a0_ = Eigen::VectorXd::Zero(dim_);
  for (const auto& s : samples) a0_ += s;
  a0_ /= n_;
  const int kmax = n_ / 2;
  a_.assign(kmax, Eigen::VectorXd::Zero(dim_));
  b_.assign(kmax, Eigen::VectorXd::Zero(dim_));
  for (int k = 1; k <= kmax; ++k) {
    const bool nyquist = (2 * k == n_);
    for (int i = 0; i < n_; ++i) {
      const double ang = kTwoPi * k * i / n_;
      a_[k - 1] += samples[i] * std::cos(ang);
      if (!nyquist) b_[k - 1] += samples[i] * std::sin(ang);
    }
    const double scale = nyquist ? 1.0 / n_ : 2.0 / n_;
    a_[k - 1] *= scale;
    b_[k - 1] *= scale;
  }
}

Eigen::VectorXd PeriodicSeries::eval(double t, int order) const {
  Eigen::VectorXd out = (order == 0) ? a0_ : Eigen::VectorXd::Zero(dim_);
  const double w = kTwoPi / period_;
  for (std::size_t k = 1; k <= a_.size(); ++k) {
    const double kw = w * static_cast<double>(k);
    const double c = std::cos(kw * t), s = std::sin(kw * t);
    switch (order) {
      case 0: out += a_[k - 1] * c + b_[k - 1] * s; break;
      case 1: out += kw * (-a_[k - 1] * s + b_[k - 1] * c); break;
      default: out += -kw * kw * (a_[k - 1] * c + b_[k - 1] * s); break;
    }
  }
  return out;
}

double PeriodicSeries::tail_magnitude() const {
  double t = 0.0;
  const std::size_t start = (3 * a_.size()) / 4;
  for (std::size_t k = start; k < a_.size(); ++k)
    t = std::max({t, a_[k].cwiseAbs().maxCoeff(), b_[k].cwiseAbs().maxCoeff()});
  return t;
}

// ---------------------------------------------------------------------------
// FFT helpers

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> fft2(const std::vector<std::complex<double>>& in, int n0, int n1,
                                       int sign) {
  std::vector<std::complex<double>> src(in), out(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(n0, n1, reinterpret_cast<fftw_complex*>(src.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Normalized forward coefficients raw[i*n1 + j].
std::vector<std::complex<double>> raw_coefficients(const std::vector<double>& grid, int n0, int n1) {
  if (static_cast<int>(grid.size()) != n0 * n1)
    throw Error(ErrorCode::InvalidParameter, "numerics", "torus grid size mismatch");
  std::vector<std::complex<double>> in(grid.begin(), grid.end());
  auto out = fft2(in, n0, n1, FFTW_FORWARD);
  const double inv = 1.0 / (static_cast<double>(n0) * n1);
  for (auto& c : out) c *= inv;
  return out;
}

int signed_index(int i, int n) { return (2 * i <= n) ? i : i - n; }
bool is_nyquist(int i, int n) { return n % 2 == 0 && 2 * i == n; }

std::vector<TorusSeries::Mode> modes_from_raw(const std::vector<std::complex<double>>& raw, int n0,
                                              int n1, double prune) {
  std::vector<TorusSeries::Mode> modes;
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const auto c = raw[i * n1 + j];
      if (std::abs(c) <= prune) continue;
      std::vector<std::pair<int, double>> ms, ns;
      const int m = signed_index(i, n0), n = signed_index(j, n1);
      if (is_nyquist(i, n0)) ms = {{m, 0.5}, {-m, 0.5}}; else ms = {{m, 1.0}};
      if (is_nyquist(j, n1)) ns = {{n, 0.5}, {-n, 0.5}}; else ns = {{n, 1.0}};
      for (auto [mm, wm] : ms)
        for (auto [nn, wn] : ns) modes.push_back({mm, nn, c * (wm * wn)});
    }
  }
  return modes;
}

}  // namespace

// ---------------------------------------------------------------------------
// TorusSeries

TorusSeries TorusSeries::from_grid(const std::vector<double>& grid, int n_theta, int n_phi,
                                   double prune) {
  TorusSeries s;
  s.n_theta_ = n_theta;
  s.n_phi_ = n_phi;
  s.modes_ = modes_from_raw(raw_coefficients(grid, n_theta, n_phi), n_theta, n_phi, prune);
  return s;
}

TorusSeries TorusSeries::from_modes(std::vector<Mode> modes, int n_theta, int n_phi) {
  TorusSeries s;
  s.n_theta_ = n_theta;
  s.n_phi_ = n_phi;
  s.modes_ = std::move(modes);
  return s;
}

std::array<double, 3> TorusSeries::eval(double theta, double phi) const {
  const int mh = n_theta_ / 2 + 1, nh = n_phi_ / 2 + 1;
  // e^{i m theta} for |m| <= mh, e^{i n phi} for |n| <= nh
  thread_local std::vector<std::complex<double>> et, ep;
  et.resize(2 * mh + 1);
  ep.resize(2 * nh + 1);
  const std::complex<double> zt = std::polar(1.0, theta), zp = std::polar(1.0, phi);
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
  double v = 0.0, dt = 0.0, dp = 0.0;
  for (const auto& md : modes_) {
    const std::complex<double> z = md.c * et[mh + md.m] * ep[nh + md.n];
    v += z.real();
    // d/dtheta of Re(z) = Re(i m z) = -m Im(z)
    dt -= md.m * z.imag();
    dp -= md.n * z.imag();
  }
  return {v, dt, dp};
}

double TorusSeries::value(double theta, double phi) const { return eval(theta, phi)[0]; }

TorusSeries TorusSeries::d_theta() const {
  TorusSeries s = *this;
  for (auto& md : s.modes_) md.c *= std::complex<double>(0.0, md.m);
  return s;
}

TorusSeries TorusSeries::d_phi() const {
  TorusSeries s = *this;
  for (auto& md : s.modes_) md.c *= std::complex<double>(0.0, md.n);
  return s;
}

std::vector<double> TorusSeries::to_grid() const {
  // separable sum: first over n at each grid phi, then over m
  const int mh = n_theta_ / 2 + 1;
  std::vector<std::complex<double>> partial(static_cast<std::size_t>(2 * mh + 1) * n_phi_, 0.0);
  for (const auto& md : modes_)
    for (int j = 0; j < n_phi_; ++j)
      partial[static_cast<std::size_t>(md.m + mh) * n_phi_ + j] +=
          md.c * std::polar(1.0, kTwoPi * md.n * j / n_phi_);
  std::vector<double> g(static_cast<std::size_t>(n_theta_) * n_phi_, 0.0);
  for (int m = -mh; m <= mh; ++m) {
    const std::complex<double>* row = &partial[static_cast<std::size_t>(m + mh) * n_phi_];
    for (int i = 0; i < n_theta_; ++i) {
      const std::complex<double> e = std::polar(1.0, kTwoPi * m * i / n_theta_);
      for (int j = 0; j < n_phi_; ++j) g[i * n_phi_ + j] += (e * row[j]).real();
    }
  }
  return g;
}

std::complex<double> TorusSeries::coefficient(int m, int n) const {
  std::complex<double> c = 0.0;
  for (const auto& md : modes_)
    if (md.m == m && md.n == n) c += md.c;
  return c;
}

double TorusSeries::spectral_tail() const {
  double t = 0.0;
  for (const auto& md : modes_)
    if (4 * std::abs(md.m) >= n_theta_ || 4 * std::abs(md.n) >= n_phi_) t = std::max(t, std::abs(md.c));
  return t;
}

TorusPrimitive integrate_closed_form(const std::vector<double>& a_theta,
                                     const std::vector<double>& a_phi, int n_theta, int n_phi,
                                     double prune) {
  const auto A = raw_coefficients(a_theta, n_theta, n_phi);
  const auto P = raw_coefficients(a_phi, n_theta, n_phi);
  std::vector<std::complex<double>> F(A.size(), 0.0);
  TorusPrimitive out;
  out.period_theta = A[0].real();
  out.period_phi = P[0].real();
  double mismatch = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      if (is_nyquist(i, n_theta) || is_nyquist(j, n_phi)) continue;
      const int m = signed_index(i, n_theta), n = signed_index(j, n_phi);
      const std::size_t k = static_cast<std::size_t>(i) * n_phi + j;
      std::complex<double> f = 0.0;
      if (m != 0) {
        f = A[k] / std::complex<double>(0.0, m);
        if (n != 0) mismatch = std::max(mismatch, std::abs(std::complex<double>(0.0, n) * f - P[k]));
      } else if (n != 0) {
        f = P[k] / std::complex<double>(0.0, n);
      }
      F[k] = f;
    }
  }
  out.closedness_residual = mismatch;
  out.f = TorusSeries::from_modes(modes_from_raw(F, n_theta, n_phi, prune), n_theta, n_phi);
  return out;
}

void torus_gradient(const std::vector<double>& grid, int n_theta, int n_phi,
                    std::vector<double>& d_theta, std::vector<double>& d_phi) {
  const auto C = raw_coefficients(grid, n_theta, n_phi);
  std::vector<std::complex<double>> Ct(C.size()), Cp(C.size());
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * n_phi + j;
      const int m = is_nyquist(i, n_theta) ? 0 : signed_index(i, n_theta);
      const int n = is_nyquist(j, n_phi) ? 0 : signed_index(j, n_phi);
      Ct[k] = C[k] * std::complex<double>(0.0, m);
      Cp[k] = C[k] * std::complex<double>(0.0, n);
    }
  }
  const auto gt = fft2(Ct, n_theta, n_phi, FFTW_BACKWARD);
  const auto gp = fft2(Cp, n_theta, n_phi, FFTW_BACKWARD);
  d_theta.resize(C.size());
  d_phi.resize(C.size());
  for (std::size_t k = 0; k < C.size(); ++k) {
    d_theta[k] = gt[k].real();
    d_phi[k] = gp[k].real();
  }
}

// ---------------------------------------------------------------------------
// Splines

namespace {
using SplineT = Eigen::Spline<double, 1, 3>;
using KnotVec = Eigen::Array<double, 1, Eigen::Dynamic>;
}  // namespace

VectorSpline::VectorSpline(const std::vector<double>& nodes, const Eigen::MatrixXd& values) {
  const int n = static_cast<int>(nodes.size());
  if (n < 4 || values.rows() != n)
    throw Error(ErrorCode::InvalidParameter, "numerics", "spline needs at least 4 nodes");
  for (int i = 1; i < n; ++i)
    if (!(nodes[i] > nodes[i - 1]))
      throw Error(ErrorCode::InvalidParameter, "numerics", "spline nodes must be increasing");
  x0_ = nodes.front();
  x1_ = nodes.back();
  KnotVec u(n);
  for (int i = 0; i < n; ++i) u[i] = (nodes[i] - x0_) / (x1_ - x0_);
  Eigen::KnotAveraging(u, 3, knots_);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto span = SplineT::Span(u[i], 3, knots_);
    A.row(i).segment(span - 3, 4) = SplineT::BasisFunctions(u[i], 3, knots_);
  }
  ctrl_ = A.fullPivLu().solve(values);
}

void VectorSpline::eval_both(double x, Eigen::VectorXd& value, Eigen::VectorXd& deriv) const {
  double u = (x - x0_) / (x1_ - x0_);
  u = std::clamp(u, 0.0, 1.0);
  const auto span = SplineT::Span(u, 3, knots_);
  const auto d = SplineT::BasisFunctionDerivatives(u, 1, 3, knots_);
  value = Eigen::VectorXd::Zero(ctrl_.cols());
  deriv = Eigen::VectorXd::Zero(ctrl_.cols());
  for (int k = 0; k < 4; ++k) {
    value += d(0, k) * ctrl_.row(span - 3 + k).transpose();
    deriv += d(1, k) * ctrl_.row(span - 3 + k).transpose();
  }
  deriv /= (x1_ - x0_);
}

Eigen::VectorXd VectorSpline::eval(double x, int order) const {
  Eigen::VectorXd v, d;
  eval_both(x, v, d);
  return order == 0 ? v : d;
}

Spline1D::Spline1D(const std::vector<double>& nodes, const std::vector<double>& values) {
  Eigen::MatrixXd m(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  s_ = VectorSpline(nodes, m);
}

VectorSpline mirrored_spline(const std::vector<double>& r_nodes, const Eigen::MatrixXd& values,
                             const std::vector<int>& parity) {
  const int n = static_cast<int>(r_nodes.size());
  std::vector<double> nodes(2 * n);
  Eigen::MatrixXd v(2 * n, values.cols());
  for (int k = 0; k < n; ++k) {
    nodes[n - 1 - k] = -r_nodes[k];
    nodes[n + k] = r_nodes[k];
    v.row(n + k) = values.row(k);
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      v(n - 1 - k, c) = parity[static_cast<std::size_t>(c)] * values(k, c);
  }
  return VectorSpline(nodes, v);
}

// ---------------------------------------------------------------------------
// Quadrature

QuadratureResult periodic_trapezoid(const std::function<double(double)>& f, int n_start,
                                    double rtol, int n_max, double atol) {
  int n = std::max(2, n_start);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += f(kTwoPi * i / n);
  double prev = sum * kTwoPi / n;
  while (2 * n <= n_max) {
    double add = 0.0;
    for (int i = 0; i < n; ++i) add += f(kTwoPi * (i + 0.5) / n);
    sum += add;
    n *= 2;
    const double cur = sum * kTwoPi / n;
    if (std::abs(cur - prev) <= rtol * std::abs(cur) + atol) return {cur, n, true};
    prev = cur;
  }
  return {prev, n, false};
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 24>::integrate(f, a, b);
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double unwrap_near(double angle, double reference) {
  return angle + kTwoPi * std::round((reference - angle) / kTwoPi);
}

}  // namespace ifield
