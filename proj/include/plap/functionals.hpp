#pragma once

// Energy Phi_lambda = H_lambda / p - F / gamma with
//   H_lambda(u) = int |u'|^p - lambda int |u|^p,   F(u) = int f |u|^gamma,
// its fibering map s+ and the reduced functional J+ on the cone
// {H_lambda < 0, F < 0}.

#include <cmath>
#include <limits>
#include <string>

#include "plap/discretization.hpp"
#include "plap/linalg.hpp"

namespace plap {

class ProblemSpec {
 public:
  /// Validates 1 < p < gamma < p* (p* = +inf in one dimension) and that f
  /// has a nonempty positive set.
  ProblemSpec(double p, double gamma, WeightField f, double support_threshold = 0.0)
      : p_(p), gamma_(gamma), f_(std::move(f)), support_(classify_support(f_, support_threshold)),
        precond_(f_.mesh()) {
    if (!(p > 1.0)) throw InvalidArgument("requires p > 1");
    if (!(gamma > p)) throw InvalidArgument("requires p < gamma");
    if (!(gamma < sobolev_critical())) throw InvalidArgument("requires gamma < p*");
    if (!support_.has_plus())
      throw HypothesisError("omega_plus_nonempty", "f has no positive part; the positive set must be nonempty");
  }

  double p() const noexcept { return p_; }
  double gamma() const noexcept { return gamma_; }
  const Mesh& mesh() const noexcept { return f_.mesh(); }
  const MeshPtr& mesh_ptr() const noexcept { return f_.mesh_ptr(); }
  const WeightField& weight() const noexcept { return f_; }
  const SupportClassification& support() const noexcept { return support_; }
  const StiffnessPreconditioner& preconditioner() const noexcept { return precond_; }

  /// N p / (N - p) for p < N, +inf otherwise; N = 1.
  double sobolev_critical() const noexcept {
    constexpr double N = 1.0;
    return p_ < N ? N * p_ / (N - p_) : std::numeric_limits<double>::infinity();
  }

  /// c_{p,gamma} = (gamma - p) / (p gamma)
  double c_pg() const noexcept { return (gamma_ - p_) / (p_ * gamma_); }

  void require_on_mesh(const NodalFunction& u, const char* where) const {
    require_same_mesh(u.mesh(), mesh(), where);
  }

 private:
  double p_;
  double gamma_;
  WeightField f_;
  SupportClassification support_;
  StiffnessPreconditioner precond_;
};

/// G = int |u'|^p, L = int |u|^p, F = int f |u|^gamma.
struct Moments {
  double G = 0.0;
  double L = 0.0;
  double F = 0.0;
  double G_low = 0.0;  // summation remainders of G and L
  double L_low = 0.0;
  /// G - lambda L with the product error and the remainders restored.
  double H(double lambda) const noexcept {
    const double pl = lambda * L;
    const double err = std::fma(lambda, L, -pl);
    return (G - pl) + ((G_low - lambda * L_low) - err);
  }
};

struct MomentGradients {
  Vector G, L, F;
};

namespace detail {

inline Moments moments(const ProblemSpec& s, const Vector& v, MomentGradients* g = nullptr) {
  Moments m;
  m.G = gradient_p_norm(s.mesh(), v, s.p(), g ? &g->G : nullptr, &m.G_low);
  m.L = power_integral(s.mesh(), v, nullptr, s.p(), g ? &g->L : nullptr, &m.L_low);
  m.F = power_integral(s.mesh(), v, &s.weight().samples(), s.gamma(), g ? &g->F : nullptr);
  return m;
}

inline double energy(const ProblemSpec& s, const Vector& u, double lambda, Vector* grad = nullptr) {
  MomentGradients g;
  const Moments m = moments(s, u, grad ? &g : nullptr);
  if (grad) *grad = (g.G - lambda * g.L) / s.p() - g.F / s.gamma();
  return m.H(lambda) / s.p() - m.F / s.gamma();
}

/// Rayleigh quotient G / L (0-homogeneous).
inline double rayleigh(const ProblemSpec& s, const Vector& v, Vector* grad = nullptr) {
  MomentGradients g;
  const Moments m = moments(s, v, grad ? &g : nullptr);
  const double R = m.G / m.L;
  if (grad) *grad = (g.G - R * g.L) / m.L;
  return R;
}

/// F / L^{gamma/p} (0-homogeneous).
inline double normalized_F(const ProblemSpec& s, const Vector& v, Vector* grad = nullptr) {
  MomentGradients g;
  const Moments m = moments(s, v, grad ? &g : nullptr);
  const double e = s.gamma() / s.p();
  const double Le = std::pow(m.L, e);
  const double val = m.F / Le;
  if (grad) *grad = g.F / Le - e * val / m.L * g.L;
  return val;
}

/// J+ in closed form; +inf outside {H_lambda < 0, F < 0}.
inline double j_plus_from(double p, double gamma, double H, double F) {
  if (!(H < 0.0) || !(F < 0.0)) return std::numeric_limits<double>::infinity();
  const double c = (gamma - p) / (p * gamma);
  return -c * std::pow(-H, gamma / (gamma - p)) / std::pow(-F, p / (gamma - p));
}

inline double j_plus(const ProblemSpec& s, const Vector& v, double lambda, Vector* grad = nullptr) {
  MomentGradients g;
  const Moments m = moments(s, v, grad ? &g : nullptr);
  const double H = m.H(lambda);
  const double inf = std::numeric_limits<double>::infinity();
  if (!(H < 0.0) || !(m.F < 0.0)) {
    if (grad) grad->setZero(v.size());
    return inf;
  }
  const double p = s.p(), gm = s.gamma();
  const double a = gm / (gm - p), b = p / (gm - p);
  const double A = -H, B = -m.F;
  const double J = -s.c_pg() * std::pow(A, a) / std::pow(B, b);
  if (grad) {
    // dJ = J (a dA / A - b dB / B), dA = -dH, dB = -dF
    *grad = J * (-a / A * (g.G - lambda * g.L) + b / B * g.F);
  }
  return J;
}

}  // namespace detail

inline double H_lambda(const ProblemSpec& s, const NodalFunction& u, double lambda) {
  s.require_on_mesh(u, "H_lambda");
  return detail::moments(s, u.values()).H(lambda);
}

inline double F_weighted(const ProblemSpec& s, const NodalFunction& u) {
  s.require_on_mesh(u, "F");
  return detail::moments(s, u.values()).F;
}

inline double energy(const ProblemSpec& s, const NodalFunction& u, double lambda) {
  s.require_on_mesh(u, "energy");
  return detail::energy(s, u.values(), lambda);
}

struct Residual {
  NodalFunction vector;  // entry i = D Phi(u)(e_i)
  double dual_norm;      // sqrt(r^T K^{-1} r)
};

inline Residual energy_residual(const ProblemSpec& s, const NodalFunction& u, double lambda) {
  s.require_on_mesh(u, "energy_residual");
  Vector r;
  detail::energy(s, u.values(), lambda, &r);
  const double nrm = s.preconditioner().dual_norm(r);
  return {NodalFunction(u.mesh_ptr(), std::move(r)), nrm};
}

/// Tridiagonal Hessian of Phi_lambda. For p < 2 the stiffness coefficient
/// on elements with zero slope uses (eps^2)^{(p-2)/2}, eps = 1e-10 max|u'|.
inline Tridiagonal energy_hessian(const ProblemSpec& s, const Vector& u, double lambda) {
  const Mesh& m = s.mesh();
  const int n = m.elements();
  const double p = s.p(), gm = s.gamma(), h = m.h();
  Tridiagonal T(m.interior_nodes());
  auto add = [&](int a, int b, double val) {  // a, b are node indices 0..n
    if (a <= 0 || a >= n || b <= 0 || b >= n) return;
    const int i = a - 1, j = b - 1;
    if (i == j)
      T.diag[i] += val;
    else if (j == i + 1)
      T.upper[i] += val;
    else
      T.lower[j] += val;
  };
  double max_slope = 0.0;
  for (int e = 0; e < n; ++e) max_slope = std::max(max_slope, std::abs(detail::slope(m, u, e)));
  const double eps = 1e-10 * (max_slope > 0.0 ? max_slope : 1.0);
  for (int e = 0; e < n; ++e) {
    const double ad = std::abs(detail::slope(m, u, e));
    const double w = (p < 2.0 && ad == 0.0) ? std::pow(eps * eps, 0.5 * (p - 2.0)) : std::pow(ad, p - 2.0);
    // (1/p) * p (p-1) |d|^{p-2} / h
    const double k = (p - 1.0) * w / h;
    add(e, e, k);
    add(e + 1, e + 1, k);
    add(e, e + 1, -k);
    add(e + 1, e, -k);
  }
  const int nq = m.quad_order();
  const double W = m.quad_weight();
  const Vector& f = s.weight().samples();
  auto reg_pow = [&](double au, double q) {
    if (au == 0.0 && q < 2.0) return std::pow(eps, q - 2.0);
    return std::pow(au, q - 2.0);
  };
  for (int e = 0; e < n; ++e) {
    const double left = e == 0 ? 0.0 : u[e - 1];
    const double right = e == n - 1 ? 0.0 : u[e];
    for (int k = 0; k < nq; ++k) {
      const double xi = m.local_coordinate(k);
      const double uq = (1.0 - xi) * left + xi * right;
      const double au = std::abs(uq);
      // -(lambda/p) p (p-1)|u|^{p-2} - (1/gamma) gamma (gamma-1) f |u|^{gamma-2}
      const double c = W * (-lambda * (p - 1.0) * reg_pow(au, p) - (gm - 1.0) * f[e * nq + k] * reg_pow(au, gm));
      const double phi[2] = {1.0 - xi, xi};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) add(e + a, e + b, c * phi[a] * phi[b]);
    }
  }
  return T;
}

struct FiberPoint {
  NodalFunction v;
  double H;
  double F;
  double s_plus;
  double J_plus;
  double lambda;
};

/// s+ = (H/F)^{1/(gamma-p)} and J+ = -c |H|^{gamma/(gamma-p)} / |F|^{p/(gamma-p)}
/// from the pair (H, F); throws NotInCone naming the failed constraint.
struct FiberValues {
  double s_plus;
  double J_plus;
};

inline FiberValues fiber_values(double p, double gamma, double H, double F) {
  if (!(H < 0.0)) throw NotInCone("H", H, F);
  if (!(F < 0.0)) throw NotInCone("F", H, F);
  return {std::pow(H / F, 1.0 / (gamma - p)), detail::j_plus_from(p, gamma, H, F)};
}

inline FiberPoint fiber_s_plus(const ProblemSpec& s, const NodalFunction& v, double lambda) {
  s.require_on_mesh(v, "fiber_s_plus");
  const Moments m = detail::moments(s, v.values());
  const double H = m.H(lambda);
  const FiberValues fv = fiber_values(s.p(), s.gamma(), H, m.F);
  return {v, H, m.F, fv.s_plus, fv.J_plus, lambda};
}

/// d^2/ds^2 Phi(s v) at s = s+(v), closed form (p - gamma) s^{p-2} H(v).
inline double fiber_second_derivative(const ProblemSpec& s, const NodalFunction& v, double lambda) {
  const FiberPoint fp = fiber_s_plus(s, v, lambda);
  return (s.p() - s.gamma()) * std::pow(fp.s_plus, s.p() - 2.0) * fp.H;
}

enum class ConeStatus { interior, boundary, outside };

inline const char* to_string(ConeStatus c) {
  switch (c) {
    case ConeStatus::interior: return "interior";
    case ConeStatus::boundary: return "boundary";
    default: return "outside";
  }
}

struct ConeMembership {
  ConeStatus status;
  double H;  // H_mu(v)
  double F;  // F(v)
};

inline ConeMembership cone_membership(const ProblemSpec& s, const NodalFunction& v, double mu, double tol_boundary) {
  s.require_on_mesh(v, "cone_membership");
  if (v.values().cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("cone_membership: zero function");
  const Moments m = detail::moments(s, v.values());
  const double H = m.H(mu);
  ConeStatus st = ConeStatus::outside;
  if (m.F < 0.0) {
    if (H < -tol_boundary)
      st = ConeStatus::interior;
    else if (std::abs(H) <= tol_boundary)
      st = ConeStatus::boundary;
  }
  return {st, H, m.F};
}

/// Scale v to unit L^p norm.
inline Vector normalize_lp(const ProblemSpec& s, const Vector& v) {
  const double L = detail::power_integral(s.mesh(), v, nullptr, s.p(), nullptr);
  return v / std::pow(L, 1.0 / s.p());
}

}  // namespace plap
