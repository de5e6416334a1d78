#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "karum/errors.hpp"

namespace karum {

// Deterministic random stream. Every draw is derived from raw engine output
// with fixed arithmetic: stdlib distributions may cache internal state (e.g.
// a spare normal deviate), which would break exact checkpoint/restore, so
// none are used here. Identical seed + identical call sequence gives
// identical draws, and serialize/restore round-trips the stream exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  int uniform_int(int n) {
    int k = static_cast<int>(uniform01() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller without a cached spare: exactly two raw draws per call.
  double normal(double mean, double stddev) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // 1-u1 in (0,1]
    return mean + stddev * r * std::cos(two_pi * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal(0.0, 1.0);
      const double v0 = 1.0 + c * x;
      if (v0 <= 0.0) continue;
      const double v = v0 * v0 * v0;
      const double u = uniform01();
      if (u == 0.0) continue;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (!is) {
      throw ParseError("malformed rng state");
    }
  }

  bool operator==(const RngStream& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace karum
