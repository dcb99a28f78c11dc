#include "replay/buffer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>

#include "replay/batch.hpp"
#include "replay/errors.hpp"

namespace replay {

namespace {

void validate_sample(const BufferSample& s, std::size_t& dim) {
  if (!std::isfinite(s.loss) || s.loss < 0.0) {
    throw std::invalid_argument("buffer sample: loss must be finite and >= 0");
  }
  if (s.class_embeddings.empty()) {
    throw std::invalid_argument("buffer sample: needs at least one class");
  }
  for (const auto& [cls, embs] : s.class_embeddings) {
    if (embs.empty()) {
      throw std::invalid_argument(
          "buffer sample: empty embedding list for a class");
    }
    for (const Embedding& e : embs) {
      if (dim == 0) dim = e.size();
      if (e.size() != dim || e.empty()) {
        throw std::invalid_argument(
            "buffer sample: inconsistent embedding dimensionality");
      }
      double sq = 0.0;
      for (double x : e) {
        if (!std::isfinite(x)) {
          throw std::invalid_argument(
              "buffer sample: non-finite embedding component");
        }
        sq += x * x;
      }
      if (sq == 0.0) {
        throw std::invalid_argument("buffer sample: zero-norm embedding");
      }
    }
  }
}

std::map<ClassId, Embedding> prototypes_of(
    std::span<const BufferSample> samples, std::size_t dim) {
  std::map<ClassId, Embedding> sums;
  std::map<ClassId, std::size_t> counts;
  for (const BufferSample& s : samples) {
    for (const auto& [cls, embs] : s.class_embeddings) {
      Embedding& sum = sums.try_emplace(cls, Embedding(dim, 0.0)).first->second;
      for (const Embedding& e : embs) {
        for (std::size_t i = 0; i < dim; ++i) sum[i] += e[i];
        ++counts[cls];
      }
    }
  }
  for (auto& [cls, sum] : sums) {
    const double n = static_cast<double>(counts[cls]);
    double sq = 0.0;
    for (double& x : sum) {
      x /= n;
      sq += x * x;
    }
    if (sq == 0.0 || !std::isfinite(sq)) {
      throw std::invalid_argument("class prototype is degenerate (zero mean)");
    }
  }
  return sums;
}

}  // namespace

ReplayBuffer ReplayBuffer::build(std::vector<BufferSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("ReplayBuffer: no samples");
  }
  std::sort(samples.begin(), samples.end(),
            [](const BufferSample& a, const BufferSample& b) {
              return a.id < b.id;
            });
  std::size_t dim = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && samples[i].id == samples[i - 1].id) {
      throw std::invalid_argument("ReplayBuffer: duplicate sample id");
    }
    validate_sample(samples[i], dim);
  }

  ReplayBuffer buf;
  buf.samples_ = std::move(samples);
  buf.embedding_dim_ = dim;

  std::map<ClassId, std::vector<std::size_t>> index;
  for (std::size_t pos = 0; pos < buf.samples_.size(); ++pos) {
    for (const auto& [cls, embs] : buf.samples_[pos].class_embeddings) {
      index[cls].push_back(pos);
    }
  }
  auto protos = prototypes_of(buf.samples_, dim);

  buf.classes_.reserve(index.size());
  buf.members_.reserve(index.size());
  buf.prototypes_.reserve(index.size());
  buf.prototype_matrix_.reserve(index.size() * dim);
  for (auto& [cls, members] : index) {
    buf.classes_.push_back(cls);
    buf.members_.push_back(std::move(members));
    Embedding& proto = protos.at(cls);
    buf.prototype_norms_.push_back(norm(proto));
    buf.prototype_matrix_.insert(buf.prototype_matrix_.end(), proto.begin(),
                                 proto.end());
    buf.prototypes_.push_back(std::move(proto));
  }

  buf.member_distances_.resize(buf.classes_.size());
  for (std::size_t cp = 0; cp < buf.classes_.size(); ++cp) {
    const ClassId cls = buf.classes_[cp];
    const Embedding& proto = buf.prototypes_[cp];
    std::vector<double>& dists = buf.member_distances_[cp];
    dists.reserve(buf.members_[cp].size());
    for (std::size_t pos : buf.members_[cp]) {
      double best = 2.0;
      for (const Embedding& e :
           buf.samples_[pos].class_embeddings.at(cls)) {
        best = std::min(best, cosine_distance(e, proto));
      }
      dists.push_back(std::max(best, 1e-12));
    }
  }
  return buf;
}

std::size_t ReplayBuffer::position_of(SampleId id) const {
  auto it = std::lower_bound(
      samples_.begin(), samples_.end(), id,
      [](const BufferSample& s, SampleId v) { return s.id < v; });
  if (it == samples_.end() || it->id != id) {
    throw std::invalid_argument("ReplayBuffer: unknown sample id");
  }
  return static_cast<std::size_t>(it - samples_.begin());
}

bool ReplayBuffer::has_class(ClassId c) const {
  return std::binary_search(classes_.begin(), classes_.end(), c);
}

std::size_t ReplayBuffer::class_position(ClassId c) const {
  auto it = std::lower_bound(classes_.begin(), classes_.end(), c);
  if (it == classes_.end() || *it != c) {
    throw std::invalid_argument("ReplayBuffer: unknown class id");
  }
  return static_cast<std::size_t>(it - classes_.begin());
}

const std::vector<std::size_t>& ReplayBuffer::class_members(ClassId c) const {
  return members_[class_position(c)];
}

const Embedding& ReplayBuffer::prototype(ClassId c) const {
  return prototypes_[class_position(c)];
}

std::span<const double> ReplayBuffer::prototype_row(
    std::size_t class_pos) const {
  return {prototype_matrix_.data() + class_pos * embedding_dim_,
          embedding_dim_};
}

double ReplayBuffer::prototype_norm(std::size_t class_pos) const {
  return prototype_norms_[class_pos];
}

const std::vector<double>& ReplayBuffer::member_prototype_distances(
    ClassId c) const {
  return member_distances_[class_position(c)];
}

ReplayBuffer select_buffer(std::span<const BufferSample> candidates,
                           const BufferSelectionConfig& cfg) {
  if (!std::isfinite(cfg.loss_threshold) || cfg.loss_threshold <= 0.0) {
    throw ConfigError("buffer selection: loss_threshold must be > 0");
  }
  if (cfg.class_floor == 0) {
    throw ConfigError("buffer selection: class_floor must be >= 1");
  }

  std::vector<const BufferSample*> kept_pool;
  for (const BufferSample& s : candidates) {
    if (s.loss < cfg.loss_threshold) kept_pool.push_back(&s);
  }
  if (kept_pool.empty()) {
    throw ExhaustionError(
        "buffer selection: no candidate below the loss threshold");
  }

  std::map<ClassId, std::vector<const BufferSample*>> by_class;
  for (const BufferSample* s : kept_pool) {
    for (const auto& [cls, embs] : s->class_embeddings) {
      by_class[cls].push_back(s);
    }
  }

  std::set<SampleId> picked;
  for (auto& [cls, members] : by_class) {
    std::sort(members.begin(), members.end(),
              [](const BufferSample* a, const BufferSample* b) {
                if (a->loss != b->loss) return a->loss < b->loss;
                return a->id < b->id;
              });
    const std::size_t take = std::min(cfg.class_floor, members.size());
    for (std::size_t i = 0; i < take; ++i) picked.insert(members[i]->id);
  }

  std::vector<BufferSample> selected;
  selected.reserve(picked.size());
  for (const BufferSample* s : kept_pool) {
    if (picked.count(s->id)) selected.push_back(*s);
  }
  return ReplayBuffer::build(std::move(selected));
}

std::map<ClassId, Embedding> compute_prototypes(
    std::span<const BufferSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("compute_prototypes: no samples");
  }
  std::size_t dim = 0;
  for (const BufferSample& s : samples) validate_sample(s, dim);
  return prototypes_of(samples, dim);
}

std::vector<SampleId> class_membership(const ReplayBuffer& buffer, ClassId c) {
  std::vector<SampleId> ids;
  for (std::size_t pos : buffer.class_members(c)) {
    ids.push_back(buffer.sample_at(pos).id);
  }
  return ids;
}

std::uint64_t buffer_content_hash(const ReplayBuffer& buffer) {
  std::uint64_t h = 14695981039346656037ull;
  auto feed_u64 = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFu;
      h *= 1099511628211ull;
    }
  };
  auto feed_f64 = [&](double v) { feed_u64(std::bit_cast<std::uint64_t>(v)); };

  feed_u64(buffer.size());
  feed_u64(buffer.embedding_dim());
  for (const BufferSample& s : buffer.samples()) {
    feed_u64(s.id);
    feed_f64(s.loss);
    feed_u64(s.class_embeddings.size());
    for (const auto& [cls, embs] : s.class_embeddings) {
      feed_u64(cls);
      feed_u64(embs.size());
      for (const Embedding& e : embs) {
        for (double x : e) feed_f64(x);
      }
    }
  }
  return h;
}

void validate_batch(const BatchContext& batch, std::size_t embedding_dim) {
  if (batch.images.empty()) {
    throw std::invalid_argument("batch: no images");
  }
  for (const BatchImage& img : batch.images) {
    if (img.top_k_embeddings.empty()) {
      throw std::invalid_argument("batch image: no embeddings");
    }
    if (!std::isfinite(img.loss) || img.loss < 0.0) {
      throw std::invalid_argument("batch image: loss must be finite and >= 0");
    }
    for (const Embedding& e : img.top_k_embeddings) {
      if (e.size() != embedding_dim) {
        throw std::invalid_argument("batch image: embedding dim mismatch");
      }
      double sq = 0.0;
      for (double x : e) {
        if (!std::isfinite(x)) {
          throw std::invalid_argument(
              "batch image: non-finite embedding component");
        }
        sq += x * x;
      }
      if (sq == 0.0) {
        throw std::invalid_argument("batch image: zero-norm embedding");
      }
    }
  }
}

}  // namespace replay
