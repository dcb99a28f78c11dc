#include "replay/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "replay/errors.hpp"

namespace replay {

namespace {

std::string normalize_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char ch : name) {
    if (ch == ' ' || ch == '-' || ch == '_') continue;
    out.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

// Shared by adaptive_route and the engine's inlined path: route to the
// balanced branch when the similarity distribution carries no signal.
RoutePath route_on_distances(std::span<const double> class_distances,
                             const AlgorithmSpec& spec) {
  if (class_distances.size() < 2) return RoutePath::Grasp;
  const ProbVec dist = power_weight_normalize(class_distances, -spec.swil.w);
  return normalized_entropy(dist) >= spec.adaptive_entropy_threshold
             ? RoutePath::Grasp
             : RoutePath::Swil;
}

}  // namespace

Algorithm parse_algorithm(std::string_view name) {
  const std::string key = normalize_name(name);
  if (key == "uniform") return Algorithm::Uniform;
  if (key == "uniformbalanced") return Algorithm::UniformBalanced;
  if (key == "grasp") return Algorithm::Grasp;
  if (key == "swil") return Algorithm::Swil;
  if (key == "swgrasp") return Algorithm::SwGrasp;
  if (key == "aswgrasp") return Algorithm::AdaptiveSwGrasp;
  if (key == "aser") return Algorithm::Aser;
  if (key == "aserpc") return Algorithm::AserPc;
  if (key == "swaserpc") return Algorithm::SwAserPc;
  throw ConfigError("unknown algorithm: " + std::string(name));
}

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Uniform: return "Uniform";
    case Algorithm::UniformBalanced: return "Uniform balanced";
    case Algorithm::Grasp: return "GRASP";
    case Algorithm::Swil: return "SWIL";
    case Algorithm::SwGrasp: return "SW-GRASP";
    case Algorithm::AdaptiveSwGrasp: return "A-SW-GRASP";
    case Algorithm::Aser: return "ASER";
    case Algorithm::AserPc: return "ASER-PC";
    case Algorithm::SwAserPc: return "SW-ASER-PC";
  }
  throw std::invalid_argument("algorithm_name: bad enum value");
}

DedupSchedule parse_dedup_schedule(std::string_view name) {
  const std::string key = normalize_name(name);
  if (key == "none") return DedupSchedule::None;
  if (key == "epoch") return DedupSchedule::PerEpoch;
  if (key == "dataset") return DedupSchedule::PerDataset;
  if (key == "bufferthird") return DedupSchedule::BufferThird;
  throw ConfigError("unknown dedup schedule: " + std::string(name));
}

std::string_view dedup_schedule_name(DedupSchedule s) {
  switch (s) {
    case DedupSchedule::None: return "none";
    case DedupSchedule::PerEpoch: return "epoch";
    case DedupSchedule::PerDataset: return "dataset";
    case DedupSchedule::BufferThird: return "buffer-third";
  }
  throw std::invalid_argument("dedup_schedule_name: bad enum value");
}

bool AlgorithmSpec::uses_swil() const {
  return algorithm == Algorithm::Swil || algorithm == Algorithm::SwGrasp ||
         algorithm == Algorithm::AdaptiveSwGrasp ||
         algorithm == Algorithm::SwAserPc;
}

bool AlgorithmSpec::uses_grasp() const {
  return algorithm == Algorithm::Grasp || algorithm == Algorithm::SwGrasp ||
         algorithm == Algorithm::AdaptiveSwGrasp;
}

bool AlgorithmSpec::uses_asv() const {
  return algorithm == Algorithm::Aser || algorithm == Algorithm::AserPc ||
         algorithm == Algorithm::SwAserPc;
}

bool AlgorithmSpec::uses_precomputed_left() const {
  return algorithm == Algorithm::AserPc || algorithm == Algorithm::SwAserPc;
}

std::size_t AlgorithmSpec::resolved_candidate_count() const {
  if (asv.candidate_count != 0) return asv.candidate_count;
  return uses_precomputed_left() ? 352 : 168;
}

void AlgorithmSpec::validate() const {
  if (!std::isfinite(swil.w)) {
    throw ConfigError("swil w must be finite");
  }
  if (!std::isfinite(grasp.w) || grasp.w <= 0.0) {
    throw ConfigError("grasp w must be finite and > 0");
  }
  if (!std::isfinite(asv.c) || asv.c <= 0.0) {
    throw ConfigError("asv c must be finite and > 0");
  }
  if (asv.knn_k == 0) {
    throw ConfigError("asv k must be >= 1");
  }
  if (!std::isfinite(adaptive_entropy_threshold) ||
      adaptive_entropy_threshold < 0.0 || adaptive_entropy_threshold > 1.0) {
    throw ConfigError("adaptive entropy threshold must lie in [0, 1]");
  }
}

void advance_window(DedupState& state, WindowEvent event,
                    DedupSchedule schedule, std::size_t buffer_size) {
  auto clear = [&state] {
    state.replayed.clear();
    state.replays_since_clear = 0;
    ++state.window_generation;
  };
  switch (event) {
    case WindowEvent::ReplayRecorded: {
      ++state.replays_since_clear;
      if (schedule == DedupSchedule::BufferThird && buffer_size > 0 &&
          state.replays_since_clear >= (buffer_size + 2) / 3) {
        clear();
      }
      break;
    }
    case WindowEvent::EpochEnd:
      if (schedule == DedupSchedule::PerEpoch) clear();
      break;
    case WindowEvent::DatasetEnd:
      if (schedule == DedupSchedule::PerDataset) clear();
      break;
  }
}

std::vector<std::uint8_t> dedup_mask(const DedupState& state,
                                     const ReplayBuffer& buffer) {
  std::vector<std::uint8_t> mask(buffer.size(), 1);
  for (SampleId id : state.replayed) {
    mask[buffer.position_of(id)] = 0;
  }
  return mask;
}

RoutePath adaptive_route(const BatchImage& image, const ReplayBuffer& buffer,
                         const AlgorithmSpec& spec) {
  if (buffer.num_classes() < 2) return RoutePath::Grasp;
  return route_on_distances(
      swil_class_distances(image.top_k_embeddings, buffer), spec);
}

RetrievalEngine::RetrievalEngine(AlgorithmSpec spec, DedupSchedule schedule,
                                 EngineOptions opts)
    : spec_(spec), schedule_(schedule), opts_(opts) {
  spec_.validate();
}

void RetrievalEngine::set_precomputed_left(std::vector<double> left) {
  if (buffer_ && left.size() != buffer_->size()) {
    throw std::invalid_argument(
        "precomputed left term length disagrees with the buffer");
  }
  left_terms_ = std::move(left);
  left_ready_ = true;
}

void RetrievalEngine::bind(const ReplayBuffer& buffer) {
  if (buffer_ == &buffer) return;
  if (buffer_ != nullptr) {
    throw std::invalid_argument(
        "a retrieval engine serves a single buffer for its lifetime");
  }
  if (left_ready_ && left_terms_.size() != buffer.size()) {
    throw std::invalid_argument(
        "precomputed left term length disagrees with the buffer");
  }
  buffer_ = &buffer;
  if (spec_.uses_precomputed_left() && !left_ready_) {
    left_terms_ = precompute_left_term(buffer, spec_.asv.knn_k);
    left_ready_ = true;
  }
  plan_mask_.assign(buffer.size(), 0);
  refresh_eligibility();
}

void RetrievalEngine::refresh_eligibility() {
  eligible_.assign(buffer_->size(), 1);
  for (SampleId id : state_.replayed) {
    eligible_[buffer_->position_of(id)] = 0;
  }
  selectable_count_ = 0;
  for (std::size_t pos = 0; pos < buffer_->size(); ++pos) {
    if (selectable(pos)) ++selectable_count_;
  }
  class_selectable_.assign(buffer_->num_classes(), 0);
  for (std::size_t cp = 0; cp < buffer_->num_classes(); ++cp) {
    for (std::size_t pos : buffer_->class_members(buffer_->classes()[cp])) {
      if (selectable(pos)) ++class_selectable_[cp];
    }
  }
}

void RetrievalEngine::clear_window_early() {
  state_.replayed.clear();
  state_.replays_since_clear = 0;
  ++state_.window_generation;
  ++early_clears_;
  refresh_eligibility();
}

void RetrievalEngine::commit(std::size_t pos, RetrievalPlan& plan) {
  const BufferSample& s = buffer_->sample_at(pos);
  plan.sample_ids.push_back(s.id);
  plan_mask_[pos] = 1;
  --selectable_count_;
  for (const auto& [cls, embs] : s.class_embeddings) {
    --class_selectable_[buffer_->class_position(cls)];
  }
  if (schedule_ != DedupSchedule::None) {
    state_.replayed.insert(s.id);
    eligible_[pos] = 0;
  }
  const std::uint64_t gen = state_.window_generation;
  advance_window(state_, WindowEvent::ReplayRecorded, schedule_,
                 buffer_->size());
  if (gen != state_.window_generation) refresh_eligibility();
}

std::size_t RetrievalEngine::pick_uniform_global(Rng& rng) {
  const std::size_t n = buffer_->size();
  for (int attempt = 0; attempt < 128; ++attempt) {
    const std::size_t pos = rng.next_index(n);
    if (selectable(pos)) return pos;
  }
  // Low selectable density: fall back to an explicit scan.
  std::vector<std::size_t> open;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (selectable(pos)) open.push_back(pos);
  }
  if (open.empty()) {
    throw ExhaustionError("uniform retrieval: no eligible sample");
  }
  return open[rng.next_index(open.size())];
}

std::size_t RetrievalEngine::pick_from_class(std::size_t class_pos,
                                             bool prototype_weighted,
                                             const BatchCoords& coords,
                                             std::size_t image, Rng& rng) {
  const ClassId cls = buffer_->classes()[class_pos];
  const std::vector<std::size_t>& members = buffer_->class_members(cls);
  const std::vector<double>& dists = buffer_->member_prototype_distances(cls);

  std::vector<std::size_t> open;
  std::vector<double> open_dists;
  open.reserve(members.size());
  if (prototype_weighted) open_dists.reserve(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (!selectable(members[m])) continue;
    open.push_back(members[m]);
    if (prototype_weighted) open_dists.push_back(dists[m]);
  }
  if (open.empty()) {
    throw ExhaustionError("class retrieval: no eligible member");
  }
  if (!prototype_weighted) {
    return open[rng.next_index(open.size())];
  }
  const ProbVec probs = power_weight_normalize(open_dists, -spec_.grasp.w);
  const std::size_t pick = sample_categorical(probs, rng);
  if (trace_due()) {
    trace_distribution("grasp", coords, image, probs.values());
  }
  return open[pick];
}

std::size_t RetrievalEngine::balanced_pick(bool prototype_weighted,
                                           const BatchCoords& coords,
                                           std::size_t image, Rng& rng) {
  const std::size_t c = buffer_->num_classes();
  const std::size_t start = cursor_.next % c;
  for (std::size_t step = 0; step < c; ++step) {
    const std::size_t cp = (start + step) % c;
    if (class_selectable_[cp] == 0) continue;  // exhausted: skip past it
    cursor_.next = (cp + 1) % c;
    return pick_from_class(cp, prototype_weighted, coords, image, rng);
  }
  throw ExhaustionError("balanced retrieval: every class is exhausted");
}

std::size_t RetrievalEngine::swil_class_pick(std::span<const double> distances,
                                             const BatchCoords& coords,
                                             std::size_t image, Rng& rng) {
  std::vector<std::size_t> open;
  std::vector<double> open_dists;
  for (std::size_t cp = 0; cp < class_selectable_.size(); ++cp) {
    if (class_selectable_[cp] == 0) continue;  // renormalize over the rest
    open.push_back(cp);
    open_dists.push_back(distances[cp]);
  }
  if (open.empty()) {
    throw ExhaustionError("similarity retrieval: every class is exhausted");
  }
  const ProbVec probs = power_weight_normalize(open_dists, -spec_.swil.w);
  const std::size_t pick = sample_categorical(probs, rng);
  if (trace_due()) {
    std::vector<double> full(class_selectable_.size(), 0.0);
    for (std::size_t i = 0; i < open.size(); ++i) full[open[i]] = probs[i];
    trace_distribution("swil", coords, image, std::move(full));
  }
  return open[pick];
}

bool RetrievalEngine::trace_due() {
  if (sink_ == nullptr || opts_.trace_rate == 0) return false;
  return (trace_counter_++ % opts_.trace_rate) == 0;
}

void RetrievalEngine::trace_distribution(const char* source,
                                         const BatchCoords& coords,
                                         std::size_t image,
                                         std::vector<double> probs) {
  DistributionRecord rec;
  rec.source = source;
  rec.at = coords;
  rec.image = image;
  rec.entropy =
      probs.size() >= 2 ? normalized_entropy(ProbVec(probs)) : 0.0;
  rec.probs = std::move(probs);
  sink_->on_distribution(rec);
}

RetrievalPlan RetrievalEngine::retrieve(const BatchContext& batch,
                                        const ReplayBuffer& buffer, Rng& rng,
                                        const BatchCoords& coords) {
  bind(buffer);
  validate_batch(batch, buffer.embedding_dim());

  const ReplayBudget budget = replay_budget(batch, loss_adapt_);
  RetrievalPlan plan;
  plan.replay_weight = budget.weight;
  const std::size_t r = budget.replay_count;
  if (r == 0) return plan;
  if (r > buffer.size()) {
    throw ExhaustionError("replay count exceeds the buffer size");
  }
  const std::size_t candidate_count = spec_.resolved_candidate_count();
  if (spec_.uses_asv() && candidate_count < r) {
    throw ConfigError("asv candidate_count is below the replay count");
  }

  // Feasibility up front: with r <= selectable samples, per-class redraws can
  // never strand the plan mid-way, so at most one early clear per plan.
  if (selectable_count_ < r) {
    if (!opts_.allow_fallback || schedule_ == DedupSchedule::None) {
      throw ExhaustionError(
          "dedup window has fewer eligible samples than the replay count");
    }
    clear_window_early();
  }

  std::vector<std::size_t> driving;
  driving.reserve(r);
  if (loss_adapt_.enabled) {
    for (std::size_t i = 0; i < batch.images.size(); ++i) {
      if (batch.images[i].loss > loss_adapt_.threshold) driving.push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < batch.images.size(); ++i) driving.push_back(i);
  }

  std::vector<std::size_t> committed;
  committed.reserve(r);
  auto commit_and_note = [&](std::size_t pos) {
    commit(pos, plan);
    committed.push_back(pos);
  };

  switch (spec_.algorithm) {
    case Algorithm::Uniform: {
      for (std::size_t t = 0; t < r; ++t) {
        commit_and_note(pick_uniform_global(rng));
      }
      break;
    }
    case Algorithm::UniformBalanced:
    case Algorithm::Grasp: {
      const bool weighted = spec_.algorithm == Algorithm::Grasp;
      for (std::size_t t = 0; t < r; ++t) {
        const std::size_t image = driving[t];
        commit_and_note(balanced_pick(weighted, coords, image, rng));
      }
      break;
    }
    case Algorithm::Swil:
    case Algorithm::SwGrasp:
    case Algorithm::AdaptiveSwGrasp: {
      const bool weighted = spec_.algorithm != Algorithm::Swil;
      for (std::size_t image : driving) {
        const std::vector<double> dists = swil_class_distances(
            batch.images[image].top_k_embeddings, *buffer_);
        if (spec_.algorithm == Algorithm::AdaptiveSwGrasp &&
            route_on_distances(dists, spec_) == RoutePath::Grasp) {
          commit_and_note(balanced_pick(true, coords, image, rng));
          continue;
        }
        const std::size_t cp = swil_class_pick(dists, coords, image, rng);
        commit_and_note(pick_from_class(cp, weighted, coords, image, rng));
      }
      break;
    }
    case Algorithm::Aser:
    case Algorithm::AserPc:
    case Algorithm::SwAserPc: {
      std::vector<std::size_t> pool;
      if (spec_.algorithm == Algorithm::SwAserPc) {
        std::vector<std::uint8_t> marked(buffer.size(), 0);
        for (std::size_t image : driving) {
          const std::vector<double> dists = swil_class_distances(
              batch.images[image].top_k_embeddings, *buffer_);
          const std::size_t cp = swil_class_pick(dists, coords, image, rng);
          for (std::size_t pos :
               buffer_->class_members(buffer_->classes()[cp])) {
            if (selectable(pos)) marked[pos] = 1;
          }
        }
        for (std::size_t pos = 0; pos < marked.size(); ++pos) {
          if (marked[pos]) pool.push_back(pos);
        }
        if (pool.size() < r) {
          // The similarity-restricted pool cannot fill the plan; widen to
          // every eligible sample rather than failing the batch.
          if (!opts_.allow_fallback) {
            throw ExhaustionError(
                "similarity candidate pool is smaller than the replay count");
          }
          pool.clear();
        }
      }
      BatchContext eval_view;
      const BatchContext* eval = &batch;
      if (loss_adapt_.enabled) {
        eval_view.images.reserve(driving.size());
        for (std::size_t image : driving) {
          eval_view.images.push_back(batch.images[image]);
        }
        eval = &eval_view;
      }
      std::vector<AsvRank> ranks;
      const std::vector<SampleId> ids = asv_select(
          *buffer_, *eval, spec_.asv, r, candidate_count, eligible_, rng,
          spec_.uses_precomputed_left() ? &left_terms_ : nullptr,
          sink_ ? &ranks : nullptr, pool);
      for (SampleId id : ids) {
        commit_and_note(buffer_->position_of(id));
      }
      for (const AsvRank& rk : ranks) {
        RankEvent ev;
        ev.at = coords;
        ev.image = driving[rk.eval_item];
        ev.rank = rk.rank;
        ev.num_candidates = rk.num_candidates;
        sink_->on_distance_rank(ev);
      }
      break;
    }
  }

  // Release the plan mask; positions still blocked by the window stay out
  // via eligible_.
  for (std::size_t pos : committed) {
    plan_mask_[pos] = 0;
    if (eligible_[pos]) {
      ++selectable_count_;
      for (const auto& [cls, embs] :
           buffer_->sample_at(pos).class_embeddings) {
        ++class_selectable_[buffer_->class_position(cls)];
      }
    }
  }
  return plan;
}

void RetrievalEngine::end_epoch() {
  const std::uint64_t gen = state_.window_generation;
  advance_window(state_, WindowEvent::EpochEnd, schedule_,
                 buffer_ ? buffer_->size() : 0);
  if (buffer_ && gen != state_.window_generation) refresh_eligibility();
}

void RetrievalEngine::end_dataset() {
  const std::uint64_t gen = state_.window_generation;
  advance_window(state_, WindowEvent::DatasetEnd, schedule_,
                 buffer_ ? buffer_->size() : 0);
  if (buffer_ && gen != state_.window_generation) refresh_eligibility();
}

}  // namespace replay
