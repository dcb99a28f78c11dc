#pragma once

#include <cstddef>

#include "replay/batch.hpp"

namespace replay {

// Loss-adaptive replay control. When disabled, every batch image warrants one
// replayed sample and the replay loss enters at full weight.
struct LossAdaptConfig {
  bool enabled = false;
  double threshold = 0.0;  // batch images with loss > threshold drive replay
};

struct ReplayBudget {
  std::size_t replay_count = 0;  // r: samples to retrieve for this batch
  double weight = 1.0;           // r / |B|: scale on the replay loss term
};

// r = |{images with loss > threshold}|, weight = r / |B|. With adaptivity
// disabled r = |B| and weight = 1.
ReplayBudget replay_budget(const BatchContext& batch,
                           const LossAdaptConfig& cfg);

// Total loss: batch term plus the weighted replay term.
double combined_loss(double batch_loss, double replay_loss, double weight);

}  // namespace replay
