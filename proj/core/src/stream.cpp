#include "replay/stream.hpp"

#include <cmath>
#include <map>

#include "replay/errors.hpp"
#include "replay/rng.hpp"

namespace replay {

namespace {

Embedding random_unit(Rng& rng, std::size_t dim) {
  Embedding v(dim);
  while (true) {
    double sq = 0.0;
    for (double& x : v) {
      x = rng.next_gaussian();
      sq += x * x;
    }
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

Embedding jitter(const Embedding& center, double spread, Rng& rng) {
  Embedding v(center.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = center[i] + spread * rng.next_gaussian();
  }
  return v;
}

}  // namespace

void StreamConfig::validate() const {
  if (num_buffer_classes == 0 || samples_per_class == 0 || num_datasets == 0 ||
      batches_per_epoch == 0 || epochs_per_dataset == 0 || batch_size == 0 ||
      batch_top_k == 0) {
    throw ConfigError("stream: all counts must be >= 1");
  }
  if (embedding_dim < 2) {
    throw ConfigError("stream: embedding_dim must be >= 2");
  }
  if (!std::isfinite(cluster_spread) || cluster_spread <= 0.0) {
    throw ConfigError("stream: cluster_spread must be > 0");
  }
  if (!std::isfinite(task_overlap) || task_overlap < 0.0 ||
      task_overlap > 1.0) {
    throw ConfigError("stream: task_overlap must lie in [0, 1]");
  }
  if (!std::isfinite(loss_decay) || loss_decay <= 0.0 || loss_decay > 1.0) {
    throw ConfigError("stream: loss_decay must lie in (0, 1]");
  }
}

SyntheticStream SyntheticStream::generate(const StreamConfig& cfg) {
  cfg.validate();
  SyntheticStream stream;
  stream.cfg_ = cfg;
  Rng rng(mix_seed(cfg.seed, 0));

  stream.class_directions_.reserve(cfg.num_buffer_classes);
  for (std::size_t c = 0; c < cfg.num_buffer_classes; ++c) {
    stream.class_directions_.push_back(random_unit(rng, cfg.embedding_dim));
  }

  // Pre-training pool: per-class clusters, 1-3 embeddings per sample under
  // its class, an occasional second class, and long-tailed losses (median
  // 0.1) so loss-threshold selection has real work to do.
  SampleId next_id = 0;
  for (std::size_t c = 0; c < cfg.num_buffer_classes; ++c) {
    const Embedding& mu = stream.class_directions_[c];
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      BufferSample sample;
      sample.id = next_id++;
      sample.loss = 0.1 * std::exp(rng.next_gaussian());
      const std::size_t n_emb = 1 + rng.next_index(3);
      std::vector<Embedding> embs;
      embs.reserve(n_emb);
      for (std::size_t e = 0; e < n_emb; ++e) {
        embs.push_back(jitter(mu, cfg.cluster_spread, rng));
      }
      sample.class_embeddings.emplace(static_cast<ClassId>(c),
                                      std::move(embs));
      if (cfg.num_buffer_classes > 1 && rng.next_double() < 0.25) {
        const std::size_t c2 =
            (c + 1 + rng.next_index(cfg.num_buffer_classes - 1)) %
            cfg.num_buffer_classes;
        sample.class_embeddings.emplace(
            static_cast<ClassId>(c2),
            std::vector<Embedding>{
                jitter(stream.class_directions_[c2], cfg.cluster_spread, rng)});
      }
      stream.pool_.push_back(std::move(sample));
    }
  }

  // Downstream tasks: 1-3 clusters each, centered between a random pool
  // prototype and a fresh random direction per task_overlap; at overlap 1 a
  // cluster center IS a pool prototype, exactly.
  const std::map<ClassId, Embedding> protos = compute_prototypes(stream.pool_);
  stream.base_.resize(cfg.num_datasets);
  stream.centers_.resize(cfg.num_datasets);
  for (std::size_t d = 0; d < cfg.num_datasets; ++d) {
    const std::size_t n_clusters = 1 + rng.next_index(3);
    std::vector<Embedding>& centers = stream.centers_[d];
    centers.reserve(n_clusters);
    for (std::size_t k = 0; k < n_clusters; ++k) {
      const ClassId j = static_cast<ClassId>(
          rng.next_index(cfg.num_buffer_classes));
      const Embedding u = random_unit(rng, cfg.embedding_dim);
      const Embedding& proto = protos.at(j);
      Embedding center(cfg.embedding_dim);
      for (std::size_t i = 0; i < cfg.embedding_dim; ++i) {
        center[i] = cfg.task_overlap * proto[i] +
                    (1.0 - cfg.task_overlap) * u[i];
      }
      centers.push_back(std::move(center));
    }
    std::vector<BatchContext>& batches = stream.base_[d];
    batches.resize(cfg.batches_per_epoch);
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      batches[b].images.reserve(cfg.batch_size);
      for (std::size_t img = 0; img < cfg.batch_size; ++img) {
        BatchImage image;
        const Embedding& center = centers[rng.next_index(n_clusters)];
        image.top_k_embeddings.reserve(cfg.batch_top_k);
        for (std::size_t e = 0; e < cfg.batch_top_k; ++e) {
          image.top_k_embeddings.push_back(
              jitter(center, cfg.cluster_spread, rng));
        }
        image.loss = 0.5 * std::exp(0.8 * rng.next_gaussian());
        batches[b].images.push_back(std::move(image));
      }
    }
  }
  return stream;
}

BatchContext SyntheticStream::batch(std::size_t dataset, std::size_t epoch,
                                    std::size_t batch) const {
  if (dataset >= base_.size() || epoch >= cfg_.epochs_per_dataset ||
      batch >= cfg_.batches_per_epoch) {
    throw std::invalid_argument("SyntheticStream: batch coordinates range");
  }
  BatchContext out = base_[dataset][batch];
  const double decay = std::pow(cfg_.loss_decay, static_cast<double>(epoch));
  for (BatchImage& img : out.images) img.loss *= decay;
  return out;
}

}  // namespace replay
