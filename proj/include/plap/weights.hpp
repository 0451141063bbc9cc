#pragma once

// Built-in weight profiles. Profiles are defined on the normalized
// coordinate t = (x - a) / (b - a) so they keep their sign structure on any
// interval.

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "plap/discretization.hpp"

namespace plap {

/// f(t) = amplitude * cos(2 pi t): positive near both ends, negative in the
/// middle half.
inline WeightField cos2pi_weight(MeshPtr mesh, double amplitude = 1.0) {
  const double a = mesh->a(), L = mesh->b() - mesh->a();
  return WeightField::sample(
      mesh, [=](double x) { return amplitude * std::cos(2.0 * std::numbers::pi * (x - a) / L); },
      {"cos2pi", {{"amplitude", amplitude}}});
}

/// +plus on the first third, 0 on the middle third, -minus on the last.
inline WeightField step3_weight(MeshPtr mesh, double plus = 1.0, double minus = 1.0) {
  const double a = mesh->a(), L = mesh->b() - mesh->a();
  return WeightField::sample(
      mesh,
      [=](double x) {
        const double t = (x - a) / L;
        if (t < 1.0 / 3.0) return plus;
        if (t < 2.0 / 3.0) return 0.0;
        return -minus;
      },
      {"step3", {{"plus", plus}, {"minus", minus}}});
}

inline WeightField constant_weight(MeshPtr mesh, double c) {
  return WeightField::sample(mesh, [=](double) { return c; }, {"constant", {{"value", c}}});
}

/// One whitespace-separated value per quadrature point, element-major.
inline WeightField load_weight_samples(MeshPtr mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open weight sample file '" + path + "'");
  std::vector<double> vals;
  double x;
  while (in >> x) vals.push_back(x);
  if (!in.eof()) throw InvalidArgument("weight sample file '" + path + "': non-numeric entry after " +
                                       std::to_string(vals.size()) + " values");
  Vector s = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return WeightField(std::move(mesh), std::move(s), {"custom", {}});
}

}  // namespace plap
