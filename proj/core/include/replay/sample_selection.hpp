#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"

namespace replay {

struct GraspConfig {
  double w = 1.0;  // inverse-distance exponent over member-prototype distances
};

// Adversarial Shapley-value selection parameters. candidate_count == 0 means
// "use the algorithm's default" (168 for the on-the-fly left term, 352 when
// the left term is precomputed), resolved by the engine.
struct AsvConfig {
  double c = 0.15;            // base adversarial/representative trade-off
  std::size_t knn_k = 20;     // K of the KNN utility
  std::size_t candidate_count = 0;
};

// Dense rows x cols score table.
struct KnnSvTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  KnnSvTable() = default;
  KnnSvTable(std::size_t r, std::size_t c, double fill)
      : rows(r), cols(c), values(r * c, fill) {}
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

enum class KReduction { Max, Min };

// One scored unit: a token embedding plus the label embedding standing in
// for its class (a class prototype for buffer samples, the token itself for
// unlabeled batch images).
struct LabeledEmbedding {
  Embedding feature;
  Embedding label;
};

// Instances grouped by owning item: instances of item i occupy
// [offsets[i], offsets[i+1]) in the flat list.
struct InstanceSet {
  std::vector<LabeledEmbedding> instances;
  std::vector<std::size_t> offsets;  // size items()+1, offsets[0] == 0

  std::size_t items() const {
    return offsets.empty() ? 0 : offsets.size() - 1;
  }
};

// Instances of the buffer samples at the given positions: every stored
// embedding becomes one instance labeled with its class prototype, classes in
// ascending order within a sample.
InstanceSet buffer_instances(const ReplayBuffer& buffer,
                             std::span<const std::size_t> positions);
// Instances of the batch images: every kept token embedding, self-labeled.
InstanceSet batch_instances(const BatchContext& batch);

// Shapley values of the candidates for a single evaluation point under the
// K-nearest-neighbor utility, via the descending recursion over candidates
// sorted by ascending cosine distance to the evaluation feature (ties broken
// toward the lower input index). The exact-match indicator is relaxed to the
// cosine similarity between candidate and evaluation label embeddings.
std::vector<double> knn_sv(std::span<const LabeledEmbedding> candidates,
                           const LabeledEmbedding& eval_point,
                           std::size_t k_nearest);

// Instance-level Shapley scores reduced to item granularity: for each
// (candidate item, evaluation item) pair, the max (or min) of knn_sv over all
// candidate-instance x evaluation-instance combinations. min_distance_out,
// when non-null, receives the minimum feature cosine distance per pair.
KnnSvTable knn_sv_table(const InstanceSet& candidates,
                        const InstanceSet& evals, std::size_t k_nearest,
                        KReduction reduction,
                        KnnSvTable* min_distance_out = nullptr);

// Adversarial value per candidate: w * mean(left row) - min(right row) with
// w = cfg.c * |min right entry| / |min left row-mean|, falling back to
// w = cfg.c when the left minimum is zero.
std::vector<double> asv_scores(const KnnSvTable& left_table,
                               const KnnSvTable& right_table,
                               const AsvConfig& cfg);
std::vector<double> asv_scores_from_left_means(
    std::span<const double> left_means, const KnnSvTable& right_table,
    const AsvConfig& cfg);

// Left-term cache over the whole buffer: row-means of the max-reduced
// buffer x buffer table, ordered by ascending sample id.
std::vector<double> precompute_left_term(const ReplayBuffer& buffer,
                                         std::size_t k_nearest);

// Uniform draw over the eligible members of one class. class_member_positions
// and eligible_by_position index the owning buffer; throws ExhaustionError
// when no member is eligible.
std::size_t uniform_member_draw(
    std::span<const std::size_t> class_member_positions,
    std::span<const std::uint8_t> eligible_by_position, Rng& rng);

// GRASP scores for the members of one class: clamped member-prototype
// distance to the power -w (so the closest member scores highest for w > 0).
std::vector<double> grasp_scores(std::span<const double> member_distances,
                                 const GraspConfig& cfg);

// One GRASP draw over a class's eligible members: probability proportional
// to distance^(-w) renormalized over the eligible subset.
std::size_t grasp_member_draw(
    std::span<const double> member_distances,
    std::span<const std::size_t> class_member_positions,
    std::span<const std::uint8_t> eligible_by_position, const GraspConfig& cfg,
    Rng& rng);

// For each batch image scored by the adversarial path: the 1-based ascending-
// distance rank of the candidate whose score column is minimal for that
// image, among the drawn candidates.
struct AsvRank {
  std::size_t eval_item = 0;
  std::size_t rank = 0;
  std::size_t num_candidates = 0;
};

// Full adversarial selection: draw up to cfg/resolved candidate_count
// candidates uniformly from the eligible pool (every eligible sample when the
// pool fits), score them, and return the n highest-ASV sample ids (score
// ties broken by lower id). candidate_pool, when non-empty, restricts the
// draw to those buffer positions. precomputed_left, when non-null, supplies
// the left term (indexed by buffer position) instead of an on-the-fly
// candidate x candidate table. Throws ExhaustionError when fewer than n
// eligible samples exist.
std::vector<SampleId> asv_select(
    const ReplayBuffer& buffer, const BatchContext& batch,
    const AsvConfig& cfg, std::size_t n, std::size_t candidate_count,
    std::span<const std::uint8_t> eligible_by_position, Rng& rng,
    const std::vector<double>* precomputed_left = nullptr,
    std::vector<AsvRank>* ranks_out = nullptr,
    std::span<const std::size_t> candidate_pool = {});

}  // namespace replay
