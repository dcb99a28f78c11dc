#include "replay/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "replay/errors.hpp"

namespace replay {

ProbVec::ProbVec(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw std::invalid_argument("ProbVec: empty distribution");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("ProbVec: entries must be finite and >= 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("ProbVec: entries must sum to 1 within 1e-9");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return std::sqrt(acc);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero-norm embedding");
  }
  return dot(a, b) / (na * nb);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return std::clamp(1.0 - cosine_similarity(a, b), 0.0, 2.0);
}

double normalized_entropy(const ProbVec& p) {
  const std::size_t n = p.size();
  if (n < 2) {
    throw std::invalid_argument("normalized_entropy: needs at least 2 bins");
  }
  double h = 0.0;
  for (double q : p.values()) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::clamp(h / std::log(static_cast<double>(n)), 0.0, 1.0);
}

ProbVec power_weight_normalize(std::span<const double> scores,
                               double exponent) {
  if (scores.empty()) {
    throw std::invalid_argument("power_weight_normalize: empty scores");
  }
  if (!std::isfinite(exponent)) {
    throw std::invalid_argument("power_weight_normalize: non-finite exponent");
  }
  std::vector<double> logw(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || scores[i] <= 0.0) {
      throw std::invalid_argument(
          "power_weight_normalize: scores must be finite and > 0");
    }
    logw[i] = exponent * std::log(scores[i]);
  }
  const double shift = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(logw[i] - shift);  // in (0, 1], so the sum cannot overflow
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return ProbVec(std::move(w));
}

std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k) {
  if (k > values.size()) {
    throw std::invalid_argument("top_k_indices: k exceeds value count");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

std::size_t sample_categorical(const ProbVec& p, Rng& rng) {
  const auto& probs = p.values();
  const double u = rng.next_double();
  double acc = 0.0;
  std::size_t pick = 0;
  bool seen = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    pick = i;
    seen = true;
    if (u < acc) break;
  }
  if (!seen) {
    throw std::invalid_argument("sample_categorical: all-zero distribution");
  }
  return pick;
}

std::vector<std::size_t> weighted_sample_without_replacement(
    const ProbVec& p, std::size_t n, Rng& rng,
    std::span<const std::uint8_t> mask, bool allow_uniform_fallback,
    bool* fallback_used) {
  const auto& probs = p.values();
  if (!mask.empty() && mask.size() != probs.size()) {
    throw std::invalid_argument(
        "weighted_sample_without_replacement: mask size mismatch");
  }
  if (fallback_used) *fallback_used = false;

  std::vector<std::uint8_t> taken(probs.size(), 0);
  auto eligible = [&](std::size_t i) {
    return !taken[i] && (mask.empty() || mask[i] != 0);
  };

  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t draw = 0; draw < n; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (eligible(i)) total += probs[i];
    }
    std::size_t pick = probs.size();
    if (total > 0.0) {
      const double u = rng.next_double() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!eligible(i) || probs[i] <= 0.0) continue;
        acc += probs[i];
        pick = i;  // remember the last positive entry for rounding slack
        if (u < acc) break;
      }
    } else {
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (eligible(i)) open.push_back(i);
      }
      if (open.empty() || !allow_uniform_fallback) {
        throw ExhaustionError(
            "weighted_sample_without_replacement: no eligible entry with "
            "positive probability");
      }
      if (fallback_used) *fallback_used = true;
      pick = open[rng.next_index(open.size())];
    }
    if (pick >= probs.size()) {
      throw ExhaustionError(
          "weighted_sample_without_replacement: fewer eligible entries than "
          "requested draws");
    }
    taken[pick] = 1;
    out.push_back(pick);
  }
  return out;
}

}  // namespace replay
