#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"

namespace replay {

// Cyclic cursor for balanced class selection. Positions index the buffer's
// ascending-id class order, so for densely numbered classes the slot value
// equals the class id.
struct BalancedCursor {
  std::size_t next = 0;
};

struct SwilConfig {
  double w = 1.0;  // inverse-distance exponent; 0 means uniform over classes
};

// The next n class slots in cyclic order starting at the cursor, together
// with the advanced cursor. Requires num_classes >= 1; the cursor wraps.
std::pair<std::vector<std::size_t>, BalancedCursor> balanced_next(
    BalancedCursor cursor, std::size_t n, std::size_t num_classes);

// Per-class similarity evidence for one image: for each class (ascending),
// the minimum cosine distance between any of the image's embeddings and the
// class prototype, clamped to at least 1e-12 so the inverse power stays
// finite on exact prototype hits.
std::vector<double> swil_class_distances(
    std::span<const Embedding> image_embeddings, const ReplayBuffer& buffer);
std::vector<double> swil_class_distances(
    std::span<const Embedding> image_embeddings,
    const std::map<ClassId, Embedding>& prototypes);

// Similarity-weighted class distribution: probability proportional to
// distance^(-w), over ascending class ids. Requires at least two classes.
ProbVec swil_distribution(std::span<const Embedding> image_embeddings,
                          const ReplayBuffer& buffer, const SwilConfig& cfg);
ProbVec swil_distribution(std::span<const Embedding> image_embeddings,
                          const std::map<ClassId, Embedding>& prototypes,
                          const SwilConfig& cfg);

// One class sampled independently per batch image from its similarity
// distribution (one uniform variate per image).
std::vector<ClassId> swil_select(const BatchContext& batch,
                                 const ReplayBuffer& buffer,
                                 const SwilConfig& cfg, Rng& rng);

}  // namespace replay
