#pragma once

#include <cstdint>
#include <random>

namespace plap {

/// mt19937_64 with a portable mapping to doubles (std distributions are
/// implementation-defined, which would break bit-identical reruns).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Independent stream for a labelled sub-task.
  Rng split(std::uint64_t label) { return Rng(eng_() ^ (label * 0x9E3779B97F4A7C15ull)); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace plap
