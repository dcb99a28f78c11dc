#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "replay/rng.hpp"

namespace replay {

using Embedding = std::vector<double>;

// Discrete probability vector: entries are finite, non-negative, and sum to 1
// within 1e-9. Construction validates; violations throw std::invalid_argument.
class ProbVec {
 public:
  explicit ProbVec(std::vector<double> probs);

  const std::vector<double>& values() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }

 private:
  std::vector<double> probs_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// 1 - cos(a, b), clamped to [0, 2]. Throws on dimension mismatch or a
// zero-norm input.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// cos(a, b) without clamping; same preconditions as cosine_distance.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Shannon entropy divided by ln(n), so the result lies in [0, 1] with 1 at
// the uniform distribution. Requires n >= 2. Zero entries contribute zero.
double normalized_entropy(const ProbVec& p);

// Normalizes scores[i]^exponent into a distribution. Computed in log space
// (shift by the max log-weight before exponentiating) so large exponents do
// not overflow and exponent == 0 yields the exactly uniform distribution.
// Scores must be finite and strictly positive.
ProbVec power_weight_normalize(std::span<const double> scores, double exponent);

// Indices of the k largest values, ordered by descending value; ties broken
// toward the lower index. Requires k <= values.size().
std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k);

// One categorical draw from p (consumes exactly one uniform variate).
std::size_t sample_categorical(const ProbVec& p, Rng& rng);

// Draws n distinct indices by sequential weighted sampling: draw one index
// proportionally to p, remove it, renormalize over the remainder, repeat.
// Entries where mask is zero are never drawn (an empty mask admits all).
// If every remaining eligible entry has zero probability, the draw falls back
// to uniform over the eligible entries when allow_uniform_fallback is set and
// throws ExhaustionError otherwise. fallback_used, when non-null, reports
// whether any draw used the fallback.
std::vector<std::size_t> weighted_sample_without_replacement(
    const ProbVec& p, std::size_t n, Rng& rng,
    std::span<const std::uint8_t> mask = {},
    bool allow_uniform_fallback = false, bool* fallback_used = nullptr);

}  // namespace replay
