#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"

namespace replay {

// Shape of the synthetic continual-learning stream: a pre-training pool of
// per-class Gaussian clusters (the buffer candidates) followed by
// num_datasets downstream tasks whose cluster centers are interpolated
// toward random buffer prototypes by task_overlap.
struct StreamConfig {
  std::size_t num_buffer_classes = 10;
  std::size_t samples_per_class = 100;
  std::size_t embedding_dim = 16;
  std::size_t num_datasets = 3;
  std::size_t batches_per_epoch = 20;
  std::size_t epochs_per_dataset = 2;
  std::size_t batch_size = 8;
  double cluster_spread = 0.25;  // within-cluster gaussian noise scale
  double task_overlap = 0.5;     // 0 = unrelated tasks, 1 = centers on prototypes
  std::uint64_t seed = 1;
  // Batch losses shrink by this factor every epoch, so the highest-loss
  // regime is the first epoch of each dataset.
  double loss_decay = 0.7;
  std::size_t batch_top_k = 8;  // embeddings kept per batch image

  void validate() const;  // throws ConfigError
};

// Fully materialized stream: the candidate pool and per-dataset base batches.
// Batches are deterministic functions of (dataset, epoch, batch): the epoch
// only rescales the base losses.
class SyntheticStream {
 public:
  static SyntheticStream generate(const StreamConfig& cfg);

  const StreamConfig& config() const { return cfg_; }
  const std::vector<BufferSample>& pool() const { return pool_; }
  std::size_t num_datasets() const { return base_.size(); }
  std::size_t epochs_per_dataset() const { return cfg_.epochs_per_dataset; }
  std::size_t batches_per_epoch() const { return cfg_.batches_per_epoch; }

  BatchContext batch(std::size_t dataset, std::size_t epoch,
                     std::size_t batch) const;

  // Unit directions of the pool's class clusters, by class id.
  const std::vector<Embedding>& class_directions() const {
    return class_directions_;
  }

  // Cluster centers the dataset's batch images are jittered around; at
  // task_overlap 1 each equals one of the pool prototypes exactly.
  const std::vector<Embedding>& dataset_cluster_centers(
      std::size_t dataset) const {
    if (dataset >= centers_.size()) {
      throw std::invalid_argument("SyntheticStream: dataset index range");
    }
    return centers_[dataset];
  }

 private:
  StreamConfig cfg_;
  std::vector<BufferSample> pool_;
  std::vector<std::vector<BatchContext>> base_;  // [dataset][batch]
  std::vector<Embedding> class_directions_;
  std::vector<std::vector<Embedding>> centers_;  // [dataset][cluster]
};

}  // namespace replay
