#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace kfim {

// All randomness in the library flows through this generator so that runs are
// reproducible across machines and standard library implementations. The bit
// stream comes from std::mt19937_64 (fully specified by the standard); the
// variate transforms are implemented here instead of relying on
// std::*_distribution, whose sequences are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via the polar Box-Muller method.
  double normal();

  /// Standard complex normal: independent N(0, 1/2) real and imaginary parts.
  std::complex<double> complex_normal() {
    return {normal() * kInvSqrt2, normal() * kInvSqrt2};
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze (boosted for shape < 1).
  double gamma(double shape);

  /// Chi-squared with (possibly non-integer) degrees of freedom.
  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  std::uint64_t raw() { return gen_(); }

  /// Algorithm tag recorded in run manifests.
  static const char* algorithm() {
    return "mt19937_64/polar-box-muller/marsaglia-tsang";
  }

 private:
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Derives an independent stream seed from a master seed. Documented rule:
/// splitmix64(master xor (stream + 1) * 0x9e3779b97f4a7c15).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace kfim
