#pragma once

// P1 finite elements on a uniform partition of (a, b) with homogeneous
// Dirichlet data. Only interior nodal values are stored.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plap/errors.hpp"

namespace plap {

using Vector = Eigen::VectorXd;

class Mesh {
 public:
  Mesh(double a, double b, int n, int quad_order) : a_(a), b_(b), n_(n), quad_order_(quad_order) {
    if (!(b > a)) throw InvalidArgument("build_mesh: requires b > a");
    if (n < 2) throw InvalidArgument("build_mesh: requires n >= 2 elements");
    if (quad_order != 1 && quad_order != 2) throw InvalidArgument("build_mesh: quad_order must be 1 or 2");
    h_ = (b - a) / n;
    if (quad_order == 1) {
      local_ = {0.5, 0.0};
      weight_ = h_;
    } else {
      const double g = 1.0 / std::sqrt(3.0);
      local_ = {0.5 * (1.0 - g), 0.5 * (1.0 + g)};
      weight_ = 0.5 * h_;
    }
    points_.resize(static_cast<std::size_t>(n) * quad_order);
    for (int e = 0; e < n; ++e)
      for (int q = 0; q < quad_order; ++q) points_[e * quad_order + q] = node(e) + local_[q] * h_;
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  int elements() const noexcept { return n_; }
  int interior_nodes() const noexcept { return n_ - 1; }
  double h() const noexcept { return h_; }
  int quad_order() const noexcept { return quad_order_; }

  /// x_i = a + i h, i = 0..n. The last node is returned as b exactly.
  double node(int i) const noexcept { return i == n_ ? b_ : a_ + i * h_; }

  /// Quadrature points, element-major: point q of element e at e*quad_order()+q.
  std::span<const double> quad_points() const noexcept { return points_; }
  std::size_t quad_size() const noexcept { return points_.size(); }
  /// Every quadrature point carries the same weight (h or h/2).
  double quad_weight() const noexcept { return weight_; }
  /// Reference coordinate in [0, 1] of local point q; the P1 shape
  /// functions there are (1 - xi, xi).
  double local_coordinate(int q) const noexcept { return local_[q]; }

  bool operator==(const Mesh& o) const noexcept {
    return a_ == o.a_ && b_ == o.b_ && n_ == o.n_ && quad_order_ == o.quad_order_;
  }

 private:
  double a_, b_;
  int n_;
  int quad_order_;
  double h_ = 0.0;
  double weight_ = 0.0;
  std::array<double, 2> local_{};
  std::vector<double> points_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

inline MeshPtr build_mesh(double a, double b, int n, int quad_order = 2) {
  return std::make_shared<const Mesh>(a, b, n, quad_order);
}

inline void require_same_mesh(const Mesh& x, const Mesh& y, const char* where) {
  if (&x != &y && !(x == y)) throw MeshMismatch(where);
}

/// Member of the discrete space: interior values, boundary trace zero.
class NodalFunction {
 public:
  NodalFunction() = default;  // empty placeholder; has no mesh

  NodalFunction(MeshPtr mesh, Vector values) : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (!mesh_) throw InvalidArgument("NodalFunction: null mesh");
    if (values_.size() != mesh_->interior_nodes())
      throw InvalidArgument("NodalFunction: expected " + std::to_string(mesh_->interior_nodes()) +
                            " interior values, got " + std::to_string(values_.size()));
  }

  static NodalFunction zero(MeshPtr mesh) {
    const int m = mesh->interior_nodes();
    return NodalFunction(std::move(mesh), Vector::Zero(m));
  }

  /// Nodal interpolant of g; g is only sampled at interior nodes.
  static NodalFunction interpolate(MeshPtr mesh, const std::function<double(double)>& g) {
    Vector v(mesh->interior_nodes());
    for (int i = 0; i < v.size(); ++i) v[i] = g(mesh->node(i + 1));
    return NodalFunction(std::move(mesh), std::move(v));
  }

  const Mesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  const Vector& values() const noexcept { return values_; }

  /// Value at node i = 0..n, zero on the boundary.
  double at_node(int i) const noexcept {
    return (i <= 0 || i >= mesh_->elements()) ? 0.0 : values_[i - 1];
  }

  double min_interior() const noexcept { return values_.size() ? values_.minCoeff() : 0.0; }

  NodalFunction scaled(double s) const { return NodalFunction(mesh_, s * values_); }
  NodalFunction abs() const { return NodalFunction(mesh_, values_.cwiseAbs()); }

 private:
  MeshPtr mesh_;
  Vector values_;
};

/// Source description of a weight profile, kept for reporting.
struct WeightSource {
  std::string name;                                  // "cos2pi", "step3", "custom", ...
  std::vector<std::pair<std::string, double>> params;
};

/// f sampled at every quadrature point of a mesh.
class WeightField {
 public:
  WeightField(MeshPtr mesh, Vector samples, WeightSource source = {})
      : mesh_(std::move(mesh)), samples_(std::move(samples)), source_(std::move(source)) {
    if (!mesh_) throw InvalidArgument("WeightField: null mesh");
    if (static_cast<std::size_t>(samples_.size()) != mesh_->quad_size())
      throw InvalidArgument("WeightField: expected " + std::to_string(mesh_->quad_size()) +
                            " samples (n * quad_order), got " + std::to_string(samples_.size()));
  }

  static WeightField sample(MeshPtr mesh, const std::function<double(double)>& f, WeightSource source) {
    Vector s(static_cast<Eigen::Index>(mesh->quad_size()));
    auto pts = mesh->quad_points();
    for (std::size_t k = 0; k < pts.size(); ++k) s[static_cast<Eigen::Index>(k)] = f(pts[k]);
    return WeightField(std::move(mesh), std::move(s), std::move(source));
  }

  const Mesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  const Vector& samples() const noexcept { return samples_; }
  const WeightSource& source() const noexcept { return source_; }

 private:
  MeshPtr mesh_;
  Vector samples_;
  WeightSource source_;
};

namespace detail {

// Kernels on raw interior vectors. Gradients are with respect to the
// interior nodal values and are accumulated into *grad when non-null.

inline double slope(const Mesh& m, const Vector& v, int e) {
  const double left = e == 0 ? 0.0 : v[e - 1];
  const double right = e == m.elements() - 1 ? 0.0 : v[e];
  return (right - left) / m.h();
}

/// Neumaier compensated sum; value() is the rounded total, low() the
/// remainder value() leaves out.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    c_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + c_; }
  double low() const noexcept { return c_ - (value() - sum_); }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

inline double gradient_p_norm(const Mesh& m, const Vector& v, double p, Vector* grad, double* low = nullptr) {
  const int n = m.elements();
  const double h = m.h();
  if (grad) grad->setZero(m.interior_nodes());
  CompensatedSum sum;
  for (int e = 0; e < n; ++e) {
    const double d = slope(m, v, e);
    const double ad = std::abs(d);
    if (ad == 0.0) continue;
    const double adp2 = std::pow(ad, p - 2.0);
    sum.add(h * adp2 * ad * ad);
    if (grad) {
      // d/du_right of h|d|^p = p |d|^{p-2} d
      const double flux = p * adp2 * d;
      if (e > 0) (*grad)[e - 1] -= flux;
      if (e < n - 1) (*grad)[e] += flux;
    }
  }
  if (low) *low = sum.low();
  return sum.value();
}

/// sum over quadrature points of W * w_k * |u_k|^q; w == nullptr means w = 1.
inline double power_integral(const Mesh& m, const Vector& v, const Vector* w, double q, Vector* grad,
                             double* low = nullptr) {
  const int n = m.elements();
  const int nq = m.quad_order();
  const double W = m.quad_weight();
  if (grad) grad->setZero(m.interior_nodes());
  CompensatedSum sum;
  for (int e = 0; e < n; ++e) {
    const double left = e == 0 ? 0.0 : v[e - 1];
    const double right = e == n - 1 ? 0.0 : v[e];
    for (int k = 0; k < nq; ++k) {
      const double xi = m.local_coordinate(k);
      const double uq = (1.0 - xi) * left + xi * right;
      const double au = std::abs(uq);
      if (au == 0.0) continue;
      const double wk = w ? (*w)[e * nq + k] : 1.0;
      if (wk == 0.0) continue;
      const double auq2 = std::pow(au, q - 2.0);
      sum.add(W * wk * auq2 * au * au);
      if (grad) {
        const double t = W * wk * q * auq2 * uq;
        if (e > 0) (*grad)[e - 1] += t * (1.0 - xi);
        if (e < n - 1) (*grad)[e] += t * xi;
      }
    }
  }
  if (low) *low = sum.low();
  return sum.value();
}

}  // namespace detail

/// sum_e h |du/dx|^p, exact for P1 functions.
inline double gradient_p_norm(const NodalFunction& u, double p) {
  if (!(p > 1.0)) throw InvalidArgument("gradient_p_norm: requires p > 1");
  return detail::gradient_p_norm(u.mesh(), u.values(), p, nullptr);
}

/// Quadrature approximation of the integral of |u|^q.
inline double lp_power_integral(const NodalFunction& u, double q) {
  if (!(q > 1.0)) throw InvalidArgument("lp_power_integral: requires q > 1");
  return detail::power_integral(u.mesh(), u.values(), nullptr, q, nullptr);
}

/// Quadrature approximation of the integral of f |u|^q (any sign).
inline double weighted_power_integral(const NodalFunction& u, const WeightField& f, double q) {
  if (!(q > 1.0)) throw InvalidArgument("weighted_power_integral: requires q > 1");
  require_same_mesh(u.mesh(), f.mesh(), "weighted_power_integral");
  return detail::power_integral(u.mesh(), u.values(), &f.samples(), q, nullptr);
}

struct Interval {
  double lo;
  double hi;
  double length() const noexcept { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

using IntervalList = std::vector<Interval>;

/// Merge intervals that touch or overlap; the result is sorted. Taking the
/// interior of a union of adjacent open intervals joins them.
inline IntervalList merge_intervals(IntervalList list) {
  std::sort(list.begin(), list.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  IntervalList out;
  for (const auto& iv : list) {
    if (!out.empty() && iv.lo <= out.back().hi + 1e-12 * (1.0 + std::abs(iv.lo)))
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

/// Partition of the domain by the sign of f, at element granularity.
struct SupportClassification {
  IntervalList plus;
  IntervalList minus;
  IntervalList zero;
  bool has_plus() const noexcept { return !plus.empty(); }
  bool has_minus() const noexcept { return !minus.empty(); }
  bool has_zero() const noexcept { return !zero.empty(); }
};

/// An element is zero when every sample satisfies |f| <= threshold;
/// otherwise its sign is that of the element integral of f (ties broken by
/// the largest-magnitude sample).
inline SupportClassification classify_support(const WeightField& f, double threshold = 0.0) {
  const Mesh& m = f.mesh();
  const int nq = m.quad_order();
  const Vector& s = f.samples();
  SupportClassification out;
  auto push = [](IntervalList& list, double lo, double hi) {
    if (!list.empty() && list.back().hi == lo)
      list.back().hi = hi;
    else
      list.push_back({lo, hi});
  };
  for (int e = 0; e < m.elements(); ++e) {
    double sum = 0.0, big = 0.0;
    bool all_small = true;
    for (int k = 0; k < nq; ++k) {
      const double v = s[e * nq + k];
      sum += v;
      if (std::abs(v) > threshold) all_small = false;
      if (std::abs(v) > std::abs(big)) big = v;
    }
    const double lo = m.node(e), hi = m.node(e + 1);
    if (all_small)
      push(out.zero, lo, hi);
    else if (sum > 0.0 || (sum == 0.0 && big > 0.0))
      push(out.plus, lo, hi);
    else
      push(out.minus, lo, hi);
  }
  return out;
}

}  // namespace plap
