#pragma once

#include <cstddef>
#include <vector>

#include "replay/geometry.hpp"

namespace replay {

// One incoming training image: the top-k token embeddings the encoder kept
// for it, plus its current model loss.
struct BatchImage {
  std::vector<Embedding> top_k_embeddings;
  double loss = 0.0;
};

// A mini-batch of new-task images presented to the retrieval engine.
struct BatchContext {
  std::vector<BatchImage> images;
};

// Validates a batch against the buffer's embedding dimensionality: non-empty,
// every image has at least one embedding of the right width, losses finite
// and non-negative. Throws std::invalid_argument.
void validate_batch(const BatchContext& batch, std::size_t embedding_dim);

}  // namespace replay
