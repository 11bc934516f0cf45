#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace capri {

// Deterministic random stream. Every run derives all of its randomness from
// an explicit seed; no code path touches wall-clock or OS entropy. Gaussian
// draws use Box-Muller on raw 53-bit uniforms so each call consumes a fixed
// number of engine words, which keeps replay and accounting exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (two engine words per call).
  double normal() {
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  // One privatization noise vector; counted for the noise-schedule audit.
  Eigen::VectorXd normal_vector(int n, double stddev) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = stddev * normal();
    ++vector_draws_;
    return z;
  }

  // Index uniform on {0, ..., n-1}.
  int uniform_index(int n) {
    const int i = static_cast<int>(uniform01() * static_cast<double>(n));
    return i >= n ? n - 1 : i;
  }

  std::uint64_t draw_raw() { return engine_(); }

  // Child stream seeded from this one; used to keep trajectory, projection
  // sampling and privatization noise on separate streams.
  Rng split() { return Rng(engine_()); }

  long vector_draws() const { return vector_draws_; }

 private:
  std::mt19937_64 engine_;
  long vector_draws_ = 0;
};

}  // namespace capri
