#include "replay/sample_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "replay/errors.hpp"

namespace replay {

InstanceSet buffer_instances(const ReplayBuffer& buffer,
                             std::span<const std::size_t> positions) {
  InstanceSet set;
  set.offsets.push_back(0);
  for (std::size_t pos : positions) {
    if (pos >= buffer.size()) {
      throw std::invalid_argument("buffer_instances: position out of range");
    }
    const BufferSample& s = buffer.sample_at(pos);
    for (const auto& [cls, embs] : s.class_embeddings) {
      const Embedding& proto = buffer.prototype(cls);
      for (const Embedding& e : embs) {
        set.instances.push_back(LabeledEmbedding{e, proto});
      }
    }
    set.offsets.push_back(set.instances.size());
  }
  return set;
}

InstanceSet batch_instances(const BatchContext& batch) {
  InstanceSet set;
  set.offsets.push_back(0);
  for (const BatchImage& img : batch.images) {
    for (const Embedding& e : img.top_k_embeddings) {
      set.instances.push_back(LabeledEmbedding{e, e});
    }
    set.offsets.push_back(set.instances.size());
  }
  return set;
}

namespace {

// Shared core of knn_sv and knn_sv_table: Shapley values for one evaluation
// feature/label over candidate instances whose feature norms, label norms,
// and label vectors are pre-extracted. distances_out, when non-null, receives
// the per-candidate cosine distances.
void knn_sv_into(std::span<const LabeledEmbedding> candidates,
                 std::span<const double> feature_norms,
                 std::span<const double> label_norms,
                 const Embedding& eval_feature, const Embedding& eval_label,
                 std::size_t k_nearest, std::vector<double>& sv_out,
                 std::vector<double>* distances_out,
                 std::vector<std::size_t>& order_scratch,
                 std::vector<double>& dist_scratch,
                 std::vector<double>& sim_scratch) {
  const std::size_t n = candidates.size();
  const double ef_norm = norm(eval_feature);
  const double el_norm = norm(eval_label);
  if (ef_norm == 0.0 || el_norm == 0.0) {
    throw std::invalid_argument("knn_sv: zero-norm evaluation embedding");
  }

  dist_scratch.resize(n);
  sim_scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cosine =
        dot(candidates[i].feature, eval_feature) / (feature_norms[i] * ef_norm);
    dist_scratch[i] = std::clamp(1.0 - cosine, 0.0, 2.0);
    sim_scratch[i] =
        dot(candidates[i].label, eval_label) / (label_norms[i] * el_norm);
  }
  if (distances_out) *distances_out = dist_scratch;

  order_scratch.resize(n);
  std::iota(order_scratch.begin(), order_scratch.end(), 0);
  std::sort(order_scratch.begin(), order_scratch.end(),
            [&](std::size_t a, std::size_t b) {
              if (dist_scratch[a] != dist_scratch[b]) {
                return dist_scratch[a] < dist_scratch[b];
              }
              return a < b;
            });

  sv_out.resize(n);
  const double k = static_cast<double>(k_nearest);
  const std::size_t last = order_scratch[n - 1];
  sv_out[last] = sim_scratch[last] / static_cast<double>(n);
  for (std::size_t p = n - 1; p-- > 0;) {
    const std::size_t i = order_scratch[p];
    const std::size_t j = order_scratch[p + 1];
    const double rank = static_cast<double>(p + 1);
    sv_out[i] = sv_out[j] + (sim_scratch[i] - sim_scratch[j]) / k *
                                (std::min(k, rank) / rank);
  }
}

void validate_instances(std::span<const LabeledEmbedding> candidates,
                        std::size_t k_nearest) {
  if (candidates.empty()) {
    throw std::invalid_argument("knn_sv: no candidates");
  }
  if (k_nearest == 0) {
    throw std::invalid_argument("knn_sv: k_nearest must be >= 1");
  }
}

struct InstanceNorms {
  std::vector<double> feature;
  std::vector<double> label;
};

InstanceNorms norms_of(std::span<const LabeledEmbedding> instances) {
  InstanceNorms norms;
  norms.feature.reserve(instances.size());
  norms.label.reserve(instances.size());
  for (const LabeledEmbedding& inst : instances) {
    const double nf = norm(inst.feature);
    const double nl = norm(inst.label);
    if (nf == 0.0 || nl == 0.0) {
      throw std::invalid_argument("knn_sv: zero-norm candidate embedding");
    }
    norms.feature.push_back(nf);
    norms.label.push_back(nl);
  }
  return norms;
}

}  // namespace

std::vector<double> knn_sv(std::span<const LabeledEmbedding> candidates,
                           const LabeledEmbedding& eval_point,
                           std::size_t k_nearest) {
  validate_instances(candidates, k_nearest);
  const InstanceNorms norms = norms_of(candidates);
  std::vector<double> sv;
  std::vector<std::size_t> order;
  std::vector<double> dist, sim;
  knn_sv_into(candidates, norms.feature, norms.label, eval_point.feature,
              eval_point.label, k_nearest, sv, nullptr, order, dist, sim);
  return sv;
}

KnnSvTable knn_sv_table(const InstanceSet& candidates,
                        const InstanceSet& evals, std::size_t k_nearest,
                        KReduction reduction, KnnSvTable* min_distance_out) {
  validate_instances(candidates.instances, k_nearest);
  if (evals.instances.empty() || evals.items() == 0) {
    throw std::invalid_argument("knn_sv_table: no evaluation instances");
  }
  const InstanceNorms norms = norms_of(candidates.instances);

  std::vector<std::size_t> owner(candidates.instances.size());
  for (std::size_t item = 0; item < candidates.items(); ++item) {
    for (std::size_t a = candidates.offsets[item];
         a < candidates.offsets[item + 1]; ++a) {
      owner[a] = item;
    }
  }

  const double init =
      reduction == KReduction::Max ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity();
  KnnSvTable table(candidates.items(), evals.items(), init);
  if (min_distance_out) {
    *min_distance_out = KnnSvTable(candidates.items(), evals.items(),
                                   std::numeric_limits<double>::infinity());
  }

  std::vector<double> sv, distances;
  std::vector<std::size_t> order;
  std::vector<double> dist_scratch, sim_scratch;
  for (std::size_t j = 0; j < evals.items(); ++j) {
    for (std::size_t b = evals.offsets[j]; b < evals.offsets[j + 1]; ++b) {
      const LabeledEmbedding& ev = evals.instances[b];
      knn_sv_into(candidates.instances, norms.feature, norms.label, ev.feature,
                  ev.label, k_nearest, sv,
                  min_distance_out ? &distances : nullptr, order, dist_scratch,
                  sim_scratch);
      for (std::size_t a = 0; a < sv.size(); ++a) {
        double& cell = table.at(owner[a], j);
        cell = reduction == KReduction::Max ? std::max(cell, sv[a])
                                            : std::min(cell, sv[a]);
        if (min_distance_out) {
          double& d = min_distance_out->at(owner[a], j);
          d = std::min(d, distances[a]);
        }
      }
    }
  }
  return table;
}

std::vector<double> asv_scores_from_left_means(
    std::span<const double> left_means, const KnnSvTable& right_table,
    const AsvConfig& cfg) {
  if (left_means.size() != right_table.rows) {
    throw std::invalid_argument("asv_scores: candidate axes disagree");
  }
  if (right_table.cols == 0) {
    throw std::invalid_argument("asv_scores: empty right table");
  }
  std::vector<double> right_min(right_table.rows);
  double right_global = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < right_table.rows; ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < right_table.cols; ++j) {
      m = std::min(m, right_table.at(i, j));
    }
    right_min[i] = m;
    right_global = std::min(right_global, m);
  }
  const double left_min =
      *std::min_element(left_means.begin(), left_means.end());

  // Dynamic weight: rescale the representativeness term to the adversarial
  // term's magnitude; fall back to the base factor when the left minimum
  // would divide by zero.
  double w = cfg.c;
  if (std::abs(left_min) != 0.0) {
    w = cfg.c * std::abs(right_global) / std::abs(left_min);
  }

  std::vector<double> out(right_table.rows);
  for (std::size_t i = 0; i < right_table.rows; ++i) {
    out[i] = w * left_means[i] - right_min[i];
  }
  return out;
}

std::vector<double> asv_scores(const KnnSvTable& left_table,
                               const KnnSvTable& right_table,
                               const AsvConfig& cfg) {
  if (left_table.rows != right_table.rows || left_table.rows == 0) {
    throw std::invalid_argument("asv_scores: candidate axes disagree");
  }
  if (left_table.cols == 0) {
    throw std::invalid_argument("asv_scores: empty left table");
  }
  std::vector<double> left_means(left_table.rows);
  for (std::size_t i = 0; i < left_table.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < left_table.cols; ++j) {
      sum += left_table.at(i, j);
    }
    left_means[i] = sum / static_cast<double>(left_table.cols);
  }
  return asv_scores_from_left_means(left_means, right_table, cfg);
}

std::vector<double> precompute_left_term(const ReplayBuffer& buffer,
                                         std::size_t k_nearest) {
  std::vector<std::size_t> positions(buffer.size());
  std::iota(positions.begin(), positions.end(), 0);
  const InstanceSet inst = buffer_instances(buffer, positions);
  const KnnSvTable left = knn_sv_table(inst, inst, k_nearest, KReduction::Max);
  std::vector<double> means(left.rows);
  for (std::size_t i = 0; i < left.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < left.cols; ++j) sum += left.at(i, j);
    means[i] = sum / static_cast<double>(left.cols);
  }
  return means;
}

std::size_t uniform_member_draw(
    std::span<const std::size_t> class_member_positions,
    std::span<const std::uint8_t> eligible_by_position, Rng& rng) {
  std::vector<std::size_t> open;
  open.reserve(class_member_positions.size());
  for (std::size_t pos : class_member_positions) {
    if (eligible_by_position[pos]) open.push_back(pos);
  }
  if (open.empty()) {
    throw ExhaustionError("uniform draw: class has no eligible member");
  }
  return open[rng.next_index(open.size())];
}

std::vector<double> grasp_scores(std::span<const double> member_distances,
                                 const GraspConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(member_distances.size());
  for (double d : member_distances) {
    if (!std::isfinite(d) || d <= 0.0) {
      throw std::invalid_argument("grasp_scores: distances must be > 0");
    }
    scores.push_back(std::pow(d, -cfg.w));
  }
  return scores;
}

std::size_t grasp_member_draw(
    std::span<const double> member_distances,
    std::span<const std::size_t> class_member_positions,
    std::span<const std::uint8_t> eligible_by_position, const GraspConfig& cfg,
    Rng& rng) {
  if (member_distances.size() != class_member_positions.size()) {
    throw std::invalid_argument("grasp draw: distance/member size mismatch");
  }
  std::vector<double> open_dist;
  std::vector<std::size_t> open_pos;
  for (std::size_t m = 0; m < class_member_positions.size(); ++m) {
    const std::size_t pos = class_member_positions[m];
    if (eligible_by_position[pos]) {
      open_dist.push_back(member_distances[m]);
      open_pos.push_back(pos);
    }
  }
  if (open_pos.empty()) {
    throw ExhaustionError("grasp draw: class has no eligible member");
  }
  const ProbVec probs = power_weight_normalize(open_dist, -cfg.w);
  return open_pos[sample_categorical(probs, rng)];
}

std::vector<SampleId> asv_select(
    const ReplayBuffer& buffer, const BatchContext& batch,
    const AsvConfig& cfg, std::size_t n, std::size_t candidate_count,
    std::span<const std::uint8_t> eligible_by_position, Rng& rng,
    const std::vector<double>* precomputed_left,
    std::vector<AsvRank>* ranks_out,
    std::span<const std::size_t> candidate_pool) {
  if (n == 0) return {};
  if (candidate_count == 0) {
    throw std::invalid_argument("asv_select: candidate_count must be >= 1");
  }
  if (candidate_count < n) {
    throw std::invalid_argument(
        "asv_select: candidate_count must cover the requested draw");
  }
  if (precomputed_left && precomputed_left->size() != buffer.size()) {
    throw std::invalid_argument(
        "asv_select: precomputed left term length disagrees with the buffer");
  }

  std::vector<std::size_t> pool;
  if (candidate_pool.empty()) {
    for (std::size_t pos = 0; pos < buffer.size(); ++pos) {
      if (eligible_by_position[pos]) pool.push_back(pos);
    }
  } else {
    for (std::size_t pos : candidate_pool) {
      if (eligible_by_position[pos]) pool.push_back(pos);
    }
  }
  if (pool.size() < n) {
    throw ExhaustionError("asv_select: fewer eligible samples than requested");
  }

  std::vector<std::size_t> candidate_positions;
  if (pool.size() <= candidate_count) {
    candidate_positions = std::move(pool);
  } else {
    // Partial Fisher-Yates: the first candidate_count entries become a
    // uniform without-replacement draw.
    for (std::size_t t = 0; t < candidate_count; ++t) {
      const std::size_t j = t + rng.next_index(pool.size() - t);
      std::swap(pool[t], pool[j]);
    }
    pool.resize(candidate_count);
    candidate_positions = std::move(pool);
  }

  const InstanceSet inst_c = buffer_instances(buffer, candidate_positions);
  const InstanceSet inst_e = batch_instances(batch);

  KnnSvTable min_dist;
  const KnnSvTable right =
      knn_sv_table(inst_c, inst_e, cfg.knn_k, KReduction::Min,
                   ranks_out ? &min_dist : nullptr);

  std::vector<double> left_means;
  if (precomputed_left) {
    left_means.reserve(candidate_positions.size());
    for (std::size_t pos : candidate_positions) {
      left_means.push_back((*precomputed_left)[pos]);
    }
  } else {
    const KnnSvTable left =
        knn_sv_table(inst_c, inst_c, cfg.knn_k, KReduction::Max);
    left_means.resize(left.rows);
    for (std::size_t i = 0; i < left.rows; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < left.cols; ++j) sum += left.at(i, j);
      left_means[i] = sum / static_cast<double>(left.cols);
    }
  }

  const std::vector<double> scores =
      asv_scores_from_left_means(left_means, right, cfg);

  auto id_of = [&](std::size_t row) {
    return buffer.sample_at(candidate_positions[row]).id;
  };

  if (ranks_out) {
    ranks_out->clear();
    for (std::size_t j = 0; j < right.cols; ++j) {
      std::size_t worst = 0;
      for (std::size_t i = 1; i < right.rows; ++i) {
        if (right.at(i, j) < right.at(worst, j) ||
            (right.at(i, j) == right.at(worst, j) &&
             id_of(i) < id_of(worst))) {
          worst = i;
        }
      }
      std::size_t rank = 1;
      for (std::size_t i = 0; i < right.rows; ++i) {
        if (i == worst) continue;
        if (min_dist.at(i, j) < min_dist.at(worst, j) ||
            (min_dist.at(i, j) == min_dist.at(worst, j) &&
             id_of(i) < id_of(worst))) {
          ++rank;
        }
      }
      ranks_out->push_back(AsvRank{j, rank, right.rows});
    }
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return id_of(a) < id_of(b);
  });

  std::vector<SampleId> picked;
  picked.reserve(n);
  for (std::size_t t = 0; t < n; ++t) picked.push_back(id_of(order[t]));
  return picked;
}

}  // namespace replay
