#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace plap {

/// Shortest-ish text form of a double for messages.
inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Precondition on an argument was violated (empty mesh, p <= 1, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two objects that must live on the same mesh do not.
class MeshMismatch : public std::invalid_argument {
 public:
  MeshMismatch() : std::invalid_argument("mesh mismatch") {}
  explicit MeshMismatch(const std::string& what) : std::invalid_argument("mesh mismatch: " + what) {}
};

/// A direction is outside the cone {H < 0, F < 0}. `failed` names the
/// first constraint that does not hold ("H" or "F").
class NotInCone : public std::domain_error {
 public:
  NotInCone(std::string failed, double H, double F)
      : std::domain_error("direction not in cone: " + failed + "-constraint fails (H=" +
                          std::to_string(H) + ", F=" + std::to_string(F) + ")"),
        failed_(std::move(failed)), H_(H), F_(F) {}
  const std::string& failed_constraint() const noexcept { return failed_; }
  double H() const noexcept { return H_; }
  double F() const noexcept { return F_; }

 private:
  std::string failed_;
  double H_;
  double F_;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A standing hypothesis of the existence theory is not met by the
/// instance. `check()` is a stable machine-readable name.
class HypothesisError : public std::runtime_error {
 public:
  HypothesisError(std::string check, const std::string& what)
      : std::runtime_error(check + ": " + what), check_(std::move(check)) {}
  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

/// A numerical procedure produced an outcome that its theory rules out
/// (path collapse, convergence to the trivial solution, ...).
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace plap
