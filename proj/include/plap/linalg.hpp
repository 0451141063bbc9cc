#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "plap/discretization.hpp"

namespace plap {

/// A(i,i) = diag[i], A(i+1,i) = lower[i], A(i,i+1) = upper[i].
struct Tridiagonal {
  Vector lower;
  Vector diag;
  Vector upper;

  explicit Tridiagonal(Eigen::Index m = 0) : lower(Vector::Zero(m > 0 ? m - 1 : 0)), diag(Vector::Zero(m)),
                                             upper(Vector::Zero(m > 0 ? m - 1 : 0)) {}

  Eigen::Index size() const noexcept { return diag.size(); }

  Vector operator*(const Vector& x) const {
    const Eigen::Index m = size();
    Vector y = diag.cwiseProduct(x);
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
      y[i] += upper[i] * x[i + 1];
      y[i + 1] += lower[i] * x[i];
    }
    return y;
  }
};

/// Gaussian elimination with partial pivoting (the LAPACK dgtsv scheme).
/// Throws ConvergenceError on an exactly singular pivot.
inline Vector solve_tridiagonal(Tridiagonal A, Vector b) {
  const Eigen::Index m = A.size();
  if (m == 0) return b;
  Vector& d = A.diag;
  Vector& du = A.upper;
  Vector& dl = A.lower;  // reused for the second superdiagonal fill
  auto singular = [] { throw ConvergenceError("tridiagonal solve: singular matrix"); };
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == 0.0) singular();
      const double fact = dl[i] / d[i];
      d[i + 1] -= fact * du[i];
      b[i + 1] -= fact * b[i];
      dl[i] = 0.0;
    } else {
      const double fact = d[i] / dl[i];
      d[i] = dl[i];
      double temp = d[i + 1];
      d[i + 1] = du[i] - fact * temp;
      if (i + 2 < m) {
        dl[i] = du[i + 1];
        du[i + 1] = -fact * dl[i];
      } else {
        dl[i] = 0.0;
      }
      du[i] = temp;
      temp = b[i];
      b[i] = b[i + 1];
      b[i + 1] = temp - fact * b[i + 1];
    }
  }
  if (d[m - 1] == 0.0) singular();
  b[m - 1] /= d[m - 1];
  if (m > 1) b[m - 2] = (b[m - 2] - du[m - 2] * b[m - 1]) / d[m - 2];
  for (Eigen::Index i = m - 3; i >= 0; --i) b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
  return b;
}

/// Inverse of the discrete Dirichlet 2-Laplacian stiffness matrix K,
/// optionally restricted to an active node set (inactive nodes are pinned
/// to zero). Used both as preconditioner and to define the dual norm
/// sqrt(r^T K^{-1} r) in which residuals are measured.
class StiffnessPreconditioner {
 public:
  StiffnessPreconditioner() = default;

  explicit StiffnessPreconditioner(const Mesh& mesh, std::vector<bool> active = {}) : active_(std::move(active)) {
    const int m = mesh.interior_nodes();
    if (active_.empty()) active_.assign(static_cast<std::size_t>(m), true);
    if (static_cast<int>(active_.size()) != m) throw InvalidArgument("preconditioner: mask size mismatch");
    const double h = mesh.h();
    // Cholesky-free Thomas factorization of the SPD tridiagonal.
    c_.assign(static_cast<std::size_t>(m), 0.0);
    d_.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
      const bool on = active_[i];
      const double diag = on ? 2.0 / h : 1.0;
      const double sub = (i > 0 && on && active_[i - 1]) ? -1.0 / h : 0.0;
      const double sup = (i + 1 < m && on && active_[i + 1]) ? -1.0 / h : 0.0;
      const double denom = diag - (i > 0 ? sub * c_[i - 1] : 0.0);
      d_[i] = denom;
      c_[i] = sup / denom;
      sub_.push_back(sub);
    }
    h_ = h;
  }

  const std::vector<bool>& active() const noexcept { return active_; }
  bool is_active(Eigen::Index i) const noexcept { return active_[static_cast<std::size_t>(i)]; }

  /// z = K^{-1} r on the active set, zero elsewhere.
  Vector apply(const Vector& r) const {
    const Eigen::Index m = r.size();
    Vector z(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double ri = active_[i] ? r[i] : 0.0;
      z[i] = (ri - (i > 0 ? sub_[i] * z[i - 1] : 0.0)) / d_[i];
    }
    for (Eigen::Index i = m - 2; i >= 0; --i) z[i] -= c_[i] * z[i + 1];
    for (Eigen::Index i = 0; i < m; ++i)
      if (!active_[i]) z[i] = 0.0;
    return z;
  }

  /// sqrt(r^T K^{-1} r)
  double dual_norm(const Vector& r) const {
    const Vector z = apply(r);
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (active_[i]) s += r[i] * z[i];
    return std::sqrt(std::max(s, 0.0));
  }

  /// sqrt(v^T K v), i.e. the H^1_0 seminorm of the P1 function v.
  double energy_norm(const Vector& v) const {
    double s = 0.0;
    const Eigen::Index m = v.size();
    for (Eigen::Index e = 0; e <= m; ++e) {
      const double l = e == 0 ? 0.0 : v[e - 1];
      const double r = e == m ? 0.0 : v[e];
      s += (r - l) * (r - l);
    }
    return std::sqrt(s / h_);
  }

  /// <x, y>_K = x^T K y
  double energy_inner(const Vector& x, const Vector& y) const {
    double s = 0.0;
    const Eigen::Index m = x.size();
    for (Eigen::Index e = 0; e <= m; ++e) {
      const double dx = (e == m ? 0.0 : x[e]) - (e == 0 ? 0.0 : x[e - 1]);
      const double dy = (e == m ? 0.0 : y[e]) - (e == 0 ? 0.0 : y[e - 1]);
      s += dx * dy;
    }
    return s / h_;
  }

 private:
  std::vector<bool> active_;
  std::vector<double> c_, d_, sub_;
  double h_ = 1.0;
};

}  // namespace plap
