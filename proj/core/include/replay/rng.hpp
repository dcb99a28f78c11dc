#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace replay {

// Deterministic random source. All derived draws (doubles, bounded indices,
// gaussians) are implemented here on top of the raw 64-bit stream so that a
// given seed produces the same sequence on every platform and standard
// library. std::mt19937_64 output is specified by the standard; the
// distributions in <random> are not, so we avoid them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection sampling keeps the draw unbiased.
  std::size_t next_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("next_index: n must be positive");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t residue =
        (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - residue;
    std::uint64_t draw = next_u64();
    while (draw > limit) draw = next_u64();
    return static_cast<std::size_t>(draw % bound);
  }

  // Standard normal via Box-Muller (one variate per call, two uniforms).
  double next_gaussian() {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for a named sub-stream (engine draws vs. data
// generation) so components do not share one generator position.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace replay
