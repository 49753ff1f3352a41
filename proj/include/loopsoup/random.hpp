#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "loopsoup/errors.hpp"

namespace loopsoup {

/// splitmix64 finalizer — used only for seed derivation, never as the stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream splitting contract: the stream for sub-unit `idx` under `master` is
///   derive_stream(master, idx) = splitmix64(splitmix64(master) ^ (idx+1)*phi64).
/// Derivations nest (experiment -> realization -> role), so results never
/// depend on how work is sharded across threads.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t idx) {
  return splitmix64(splitmix64(master) ^ ((idx + 1) * 0x9E3779B97F4A7C15ull));
}

/// Deterministic RNG: mt19937_64 (bit-portable engine, standard-specified)
/// plus explicitly implemented distributions, so that identical seeds give
/// identical streams on any conforming toolchain. No std:: distribution
/// objects are used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1] — safe under log().
  double uniform_pos() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Standard normal via Box-Muller (no state carried between calls).
  double normal() {
    double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    double theta = 6.283185307179586476925286766559 * uniform();
    return r * std::cos(theta);
  }

  /// Gamma(shape, 1). Marsaglia-Tsang for shape >= 1; shapes below 1 use the
  /// exact boost Gamma(a) = Gamma(a+1) * U^{1/a}.
  double gamma(double shape) {
    require(shape > 0.0, Errc::out_of_domain, "gamma shape must be positive");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Poisson(mean). Inversion below 30; above, exact halving
  /// Poisson(m) = Poisson(m/2) + Poisson(m/2) until the pieces are small.
  /// No normal approximation anywhere.
  std::uint64_t poisson(double mean) {
    require(mean >= 0.0, Errc::out_of_domain, "poisson mean must be nonnegative");
    if (mean == 0.0) return 0;
    if (mean < 30.0) return poisson_inv(mean);
    return poisson(mean / 2.0) + poisson(mean / 2.0);
  }

  /// Categorical draw proportional to `w[0..n)`; weights must be nonnegative
  /// with a positive sum.
  int categorical(const double* w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    require(total > 0.0, Errc::zero_intensity, "categorical weights sum to zero");
    double target = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (target < acc) return i;
    }
    // fp slack: fall back to the last positive weight
    for (int i = n - 1; i >= 0; --i)
      if (w[i] > 0.0) return i;
    return n - 1;
  }

 private:
  std::uint64_t poisson_inv(double mean) {
    double p = std::exp(-mean);
    double c = p;
    double u = uniform();
    std::uint64_t k = 0;
    // mean < 30 so the loop terminates fast; the hard cap guards underflow.
    while (u > c && k < 400) {
      ++k;
      p *= mean / static_cast<double>(k);
      c += p;
    }
    return k;
  }

  std::mt19937_64 eng_;
};

}  // namespace loopsoup
