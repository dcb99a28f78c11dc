#include "replay/loss_adaptivity.hpp"

#include <cmath>
#include <stdexcept>

namespace replay {

ReplayBudget replay_budget(const BatchContext& batch,
                           const LossAdaptConfig& cfg) {
  if (batch.images.empty()) {
    throw std::invalid_argument("replay_budget: empty batch");
  }
  ReplayBudget budget;
  if (!cfg.enabled) {
    budget.replay_count = batch.images.size();
    budget.weight = 1.0;
    return budget;
  }
  if (!std::isfinite(cfg.threshold) || cfg.threshold < 0.0) {
    throw std::invalid_argument(
        "replay_budget: threshold must be finite and >= 0");
  }
  std::size_t r = 0;
  for (const BatchImage& img : batch.images) {
    if (img.loss > cfg.threshold) ++r;
  }
  budget.replay_count = r;
  budget.weight =
      static_cast<double>(r) / static_cast<double>(batch.images.size());
  return budget;
}

double combined_loss(double batch_loss, double replay_loss, double weight) {
  if (!std::isfinite(batch_loss) || !std::isfinite(replay_loss) ||
      !std::isfinite(weight) || weight < 0.0) {
    throw std::invalid_argument("combined_loss: non-finite term");
  }
  return batch_loss + weight * replay_loss;
}

}  // namespace replay
