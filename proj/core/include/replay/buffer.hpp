#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "replay/geometry.hpp"

namespace replay {

using SampleId = std::uint64_t;
using ClassId = std::uint32_t;

// One stored image: the per-class token embeddings kept for it and the model
// loss recorded when the buffer was built. An image that shows several
// classes carries one embedding list per class and is stored once.
struct BufferSample {
  SampleId id = 0;
  double loss = 0.0;
  std::map<ClassId, std::vector<Embedding>> class_embeddings;
};

// Loss-based admission rule: keep samples with loss strictly below the
// threshold, then per class the min(class_floor, available) lowest-loss ones.
struct BufferSelectionConfig {
  double loss_threshold = 0.15;
  std::size_t class_floor = 50;
};

// Immutable replay memory. Samples are held in ascending-id order; the class
// index, class prototypes, and per-member prototype distances are computed
// once at build time since every retrieval primitive reads them.
class ReplayBuffer {
 public:
  // Validates and indexes the samples. Requirements: at least one sample,
  // unique ids, finite non-negative losses, at least one class per sample,
  // non-empty embedding lists, and all embeddings finite, non-zero, and of
  // one shared dimensionality. Throws std::invalid_argument.
  static ReplayBuffer build(std::vector<BufferSample> samples);

  std::size_t size() const { return samples_.size(); }
  std::size_t embedding_dim() const { return embedding_dim_; }
  const std::vector<BufferSample>& samples() const { return samples_; }
  const BufferSample& sample_at(std::size_t pos) const {
    return samples_[pos];
  }
  // Position of an id in ascending-id order; throws on an unknown id.
  std::size_t position_of(SampleId id) const;

  const std::vector<ClassId>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }
  bool has_class(ClassId c) const;
  // Rank of a class in ascending-id order over classes(); throws if absent.
  std::size_t class_position(ClassId c) const;
  // Sample positions holding class c, ascending. Throws if absent.
  const std::vector<std::size_t>& class_members(ClassId c) const;

  // Class prototype: component-wise mean of every stored embedding filed
  // under the class, across all member samples.
  const Embedding& prototype(ClassId c) const;
  // Row view into the contiguous num_classes() x embedding_dim() prototype
  // matrix, indexed by class position.
  std::span<const double> prototype_row(std::size_t class_pos) const;
  double prototype_norm(std::size_t class_pos) const;

  // For each member of class c (aligned with class_members(c)): the minimum
  // cosine distance from the member's embeddings under c to the class
  // prototype, clamped to at least 1e-12 so inverse-power weights stay
  // finite. Buffer-constant, so cached here.
  const std::vector<double>& member_prototype_distances(ClassId c) const;

 private:
  ReplayBuffer() = default;

  std::vector<BufferSample> samples_;
  std::size_t embedding_dim_ = 0;
  std::vector<ClassId> classes_;
  std::vector<std::vector<std::size_t>> members_;        // by class position
  std::vector<std::vector<double>> member_distances_;    // by class position
  std::vector<double> prototype_matrix_;                 // row-major
  std::vector<double> prototype_norms_;
  std::vector<Embedding> prototypes_;
};

// Applies the admission rule to a candidate pool and builds the buffer from
// the union of the per-class picks (ties on loss broken by lower id; kept
// samples enter whole, with all their classes). Throws ConfigError on a
// non-positive threshold or zero floor and ExhaustionError when nothing
// survives the loss filter.
ReplayBuffer select_buffer(std::span<const BufferSample> candidates,
                           const BufferSelectionConfig& cfg);

// Recomputes class prototypes from the stored samples (mean of all stored
// embeddings per class). build() already caches these; this exists for
// callers holding plain sample sets.
std::map<ClassId, Embedding> compute_prototypes(
    std::span<const BufferSample> samples);

// Ids of the samples holding class c, ascending.
std::vector<SampleId> class_membership(const ReplayBuffer& buffer, ClassId c);

// Order-independent content hash of ids, losses, classes, and embedding bits.
// Used to key precomputed-term files to the buffer they were derived from.
std::uint64_t buffer_content_hash(const ReplayBuffer& buffer);

}  // namespace replay
