#pragma once

// Independent reference computations used by the tests. None of these call
// into the solver's kernels.

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

constexpr double pi = 3.14159265358979323846;

/// pi_p = 2 int_0^1 (1 - s^p)^{-1/p} ds by tanh-sinh quadrature.
inline double pi_p_quadrature(double p) {
  boost::math::quadrature::tanh_sinh<double> ts;
  // xc is the distance to the nearer endpoint; near s = 1, 1 - s^p = -expm1(p log1p(-xc))
  auto g = [p](double s, double xc) {
    const double w = (s > 0.5 && xc > 0) ? -std::expm1(p * std::log1p(-xc)) : 1.0 - std::pow(s, p);
    return std::pow(w, -1.0 / p);
  };
  return 2.0 * ts.integrate(g, 0.0, 1.0);
}

/// Closed form of pi_p.
inline double pi_p_closed(double p) { return 2.0 * pi / (p * std::sin(pi / p)); }

/// First Dirichlet eigenvalue of -Delta_p on an interval of the given length.
inline double lambda1_closed(double p, double length = 1.0) {
  return (p - 1.0) * std::pow(pi_p_closed(p), p) / std::pow(length, p);
}

/// int_a^b g by composite 20-point Gauss on `panels` panels.
inline double integrate(const std::function<double(double)>& g, double a, double b, int panels = 64) {
  double s = 0.0;
  const double h = (b - a) / panels;
  for (int k = 0; k < panels; ++k)
    s += boost::math::quadrature::gauss<double, 20>::integrate(g, a + k * h, a + (k + 1) * h);
  return s;
}

inline double signed_pow(double x, double e) { return x < 0 ? -std::pow(-x, e) : std::pow(x, e); }

/// Shooting for the first Dirichlet eigenvalue of -(|u'|^{p-2}u')' = lambda |u|^{p-2} u
/// on (0,1). Integrates at lambda = 1 from u(0) = 0, flux |u'|^{p-2}u'(0) = 1 to
/// the first zero of the flux, at x = z/2; then lambda1(0,1) = z^p by scaling.
inline double lambda1_shooting(double p) {
  using State = std::array<double, 2>;  // u, flux
  namespace ode = boost::numeric::odeint;
  auto rhs = [p](const State& y, State& dy, double) {
    dy[0] = signed_pow(y[1], 1.0 / (p - 1.0));
    dy[1] = -signed_pow(y[0], p - 1.0);
  };
  auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  stepper.initialize(State{0.0, 1.0}, 0.0, 1e-4);
  while (true) {
    stepper.do_step(rhs);
    if (stepper.current_state()[1] <= 0.0) break;
    if (stepper.current_time() > 100.0) throw std::runtime_error("lambda1_shooting: no turning point");
  }
  double lo = stepper.previous_time(), hi = stepper.current_time();
  State y;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    stepper.calc_state(mid, y);
    (y[1] > 0.0 ? lo : hi) = mid;
  }
  return std::pow(2.0 * 0.5 * (lo + hi), p);
}

/// Continuum constrained eigenvalue for p = 2 and a smooth weight f:
/// -u'' = lambda u + nu f u^{gamma-1}, u(0) = u(1) = 0, u'(0) = 1, int f u^gamma = 0,
/// solved by two-parameter shooting with a Newton iteration on (lambda, nu).
struct ConstrainedShooting {
  double lambda = 0.0;
  double nu = 0.0;
  double u_end = 0.0;
  double F_end = 0.0;
  int iterations = 0;
};

inline std::array<double, 2> shoot_p2(const std::function<double(double)>& f, double gamma, double lambda, double nu) {
  using State = std::array<double, 3>;  // u, u', int f |u|^gamma
  namespace ode = boost::numeric::odeint;
  auto rhs = [&](const State& y, State& dy, double x) {
    dy[0] = y[1];
    dy[1] = -lambda * y[0] - nu * f(x) * signed_pow(y[0], gamma - 1.0);
    dy[2] = f(x) * std::pow(std::abs(y[0]), gamma);
  };
  State y{0.0, 1.0, 0.0};
  ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>()), rhs, y, 0.0, 1.0,
                          1e-4);
  return {y[0], y[2]};
}

inline ConstrainedShooting constrained_eigen_p2(const std::function<double(double)>& f, double gamma, double lambda0,
                                                double nu0) {
  ConstrainedShooting out;
  double lam = lambda0, nu = nu0;
  for (int it = 0; it < 50; ++it) {
    const auto r = shoot_p2(f, gamma, lam, nu);
    out.iterations = it;
    if (std::abs(r[0]) < 1e-12 && std::abs(r[1]) < 1e-12) break;
    const double dl = 1e-6 * std::max(1.0, std::abs(lam)), dn = 1e-6 * std::max(1.0, std::abs(nu));
    const auto rl = shoot_p2(f, gamma, lam + dl, nu), rn = shoot_p2(f, gamma, lam, nu + dn);
    const double a = (rl[0] - r[0]) / dl, b = (rn[0] - r[0]) / dn;
    const double c = (rl[1] - r[1]) / dl, d = (rn[1] - r[1]) / dn;
    const double det = a * d - b * c;
    if (det == 0.0) break;
    lam -= (d * r[0] - b * r[1]) / det;
    nu -= (-c * r[0] + a * r[1]) / det;
  }
  const auto r = shoot_p2(f, gamma, lam, nu);
  out.lambda = lam;
  out.nu = nu;
  out.u_end = r[0];
  out.F_end = r[1];
  return out;
}

/// Reference P1 quantities computed directly from nodal values (boundary
/// zeros included), with a 20-point Gauss rule per element for mass terms.
struct P1 {
  double a, b;
  int n;
  double h() const { return (b - a) / n; }
  double node(int i) const { return a + (b - a) * i / n; }

  // full nodal vector with zeros at both ends
  std::vector<double> full(const std::vector<double>& interior) const {
    std::vector<double> v(n + 1, 0.0);
    for (int i = 1; i < n; ++i) v[i] = interior[i - 1];
    return v;
  }

  double grad_p(const std::vector<double>& interior, double p) const {
    const auto v = full(interior);
    double s = 0.0;
    for (int e = 0; e < n; ++e) s += h() * std::pow(std::abs((v[e + 1] - v[e]) / h()), p);
    return s;
  }

  double mass(const std::vector<double>& interior, double q, const std::function<double(double)>& w) const {
    const auto v = full(interior);
    double s = 0.0;
    for (int e = 0; e < n; ++e) {
      const double x0 = node(e), x1 = node(e + 1);
      auto g = [&](double x) {
        const double t = (x - x0) / (x1 - x0);
        return w(x) * std::pow(std::abs((1 - t) * v[e] + t * v[e + 1]), q);
      };
      s += boost::math::quadrature::gauss<double, 20>::integrate(g, x0, x1);
    }
    return s;
  }
};

/// Seeded generator for test data.
inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Smooth random positive interior samples: sin(pi x) times a positive
/// random trigonometric factor, so that F and H signs vary from draw to draw.
inline std::vector<double> random_positive(std::mt19937_64& g, int n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double c[4];
  for (double& ck : c) ck = U(g);
  const double amp = std::exp(U(g));
  std::vector<double> v(n - 1);
  for (int i = 1; i < n; ++i) {
    const double x = (double(i) / n);
    double m = 1.2;
    for (int k = 0; k < 4; ++k) m += 0.25 * c[k] * std::sin((k + 2) * pi * x + k);
    v[i - 1] = amp * std::sin(pi * x) * m * (1.0 + 0.05 * U(g));
  }
  return v;
}

}  // namespace oracle

namespace oracle {

/// sin(pi x) plus a random sine series with decaying coefficients.
inline std::vector<double> random_sine_series(std::mt19937_64& g, int n, double spread = 0.3, int modes = 6) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> c(modes);
  for (int k = 1; k < modes; ++k) c[k] = spread * U(g) / (k * k);
  std::vector<double> v(n - 1);
  for (int i = 1; i < n; ++i) {
    const double x = double(i) / n;
    double s = std::sin(pi * x);
    for (int k = 1; k < modes; ++k) s += c[k] * std::sin((k + 1) * pi * x);
    v[i - 1] = s;
  }
  return v;
}

inline std::vector<double> random_vector(std::mt19937_64& g, int size) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> v(size);
  for (double& x : v) x = N(g);
  return v;
}

}  // namespace oracle
