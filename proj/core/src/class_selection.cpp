#include "replay/class_selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace replay {

std::pair<std::vector<std::size_t>, BalancedCursor> balanced_next(
    BalancedCursor cursor, std::size_t n, std::size_t num_classes) {
  if (num_classes == 0) {
    throw std::invalid_argument("balanced_next: no classes");
  }
  std::vector<std::size_t> slots;
  slots.reserve(n);
  std::size_t at = cursor.next % num_classes;
  for (std::size_t i = 0; i < n; ++i) {
    slots.push_back(at);
    at = (at + 1) % num_classes;
  }
  return {std::move(slots), BalancedCursor{at}};
}

std::vector<double> swil_class_distances(
    std::span<const Embedding> image_embeddings, const ReplayBuffer& buffer) {
  if (image_embeddings.empty()) {
    throw std::invalid_argument("swil: image has no embeddings");
  }
  const std::size_t dim = buffer.embedding_dim();
  std::vector<double> emb_norms(image_embeddings.size());
  for (std::size_t e = 0; e < image_embeddings.size(); ++e) {
    if (image_embeddings[e].size() != dim) {
      throw std::invalid_argument("swil: embedding dim mismatch");
    }
    emb_norms[e] = norm(image_embeddings[e]);
    if (emb_norms[e] == 0.0) {
      throw std::invalid_argument("swil: zero-norm embedding");
    }
  }
  std::vector<double> dists(buffer.num_classes());
  for (std::size_t cp = 0; cp < buffer.num_classes(); ++cp) {
    const std::span<const double> proto = buffer.prototype_row(cp);
    const double pn = buffer.prototype_norm(cp);
    double best = 2.0;
    for (std::size_t e = 0; e < image_embeddings.size(); ++e) {
      const double cosine =
          dot(image_embeddings[e], proto) / (emb_norms[e] * pn);
      best = std::min(best, std::clamp(1.0 - cosine, 0.0, 2.0));
    }
    dists[cp] = std::max(best, 1e-12);
  }
  return dists;
}

std::vector<double> swil_class_distances(
    std::span<const Embedding> image_embeddings,
    const std::map<ClassId, Embedding>& prototypes) {
  if (image_embeddings.empty()) {
    throw std::invalid_argument("swil: image has no embeddings");
  }
  if (prototypes.empty()) {
    throw std::invalid_argument("swil: no prototypes");
  }
  std::vector<double> dists;
  dists.reserve(prototypes.size());
  for (const auto& [cls, proto] : prototypes) {
    double best = 2.0;
    for (const Embedding& e : image_embeddings) {
      best = std::min(best, cosine_distance(e, proto));
    }
    dists.push_back(std::max(best, 1e-12));
  }
  return dists;
}

ProbVec swil_distribution(std::span<const Embedding> image_embeddings,
                          const ReplayBuffer& buffer, const SwilConfig& cfg) {
  return power_weight_normalize(swil_class_distances(image_embeddings, buffer),
                                -cfg.w);
}

ProbVec swil_distribution(std::span<const Embedding> image_embeddings,
                          const std::map<ClassId, Embedding>& prototypes,
                          const SwilConfig& cfg) {
  return power_weight_normalize(
      swil_class_distances(image_embeddings, prototypes), -cfg.w);
}

std::vector<ClassId> swil_select(const BatchContext& batch,
                                 const ReplayBuffer& buffer,
                                 const SwilConfig& cfg, Rng& rng) {
  std::vector<ClassId> picks;
  picks.reserve(batch.images.size());
  for (const BatchImage& img : batch.images) {
    const ProbVec dist = swil_distribution(img.top_k_embeddings, buffer, cfg);
    picks.push_back(buffer.classes()[sample_categorical(dist, rng)]);
  }
  return picks;
}

}  // namespace replay
