#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"
#include "replay/class_selection.hpp"
#include "replay/loss_adaptivity.hpp"
#include "replay/sample_selection.hpp"
#include "replay/trace.hpp"

namespace replay {

// The nine retrieval algorithms, each a fixed composition of one class-
// selection primitive (none / balanced / similarity-weighted) with one
// sample-selection primitive (uniform / prototype-weighted / adversarial
// Shapley value).
enum class Algorithm {
  Uniform,
  UniformBalanced,
  Grasp,
  Swil,
  SwGrasp,
  AdaptiveSwGrasp,
  Aser,
  AserPc,
  SwAserPc,
};

// Canonical display names ("Uniform balanced", "SW-ASER-PC", ...). Parsing is
// case-insensitive and ignores spaces, hyphens, and underscores; unknown
// names throw ConfigError.
Algorithm parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm a);

enum class DedupSchedule { None, PerEpoch, PerDataset, BufferThird };

// Parses "none" | "epoch" | "dataset" | "buffer-third" (same normalization
// as algorithm names); throws ConfigError.
DedupSchedule parse_dedup_schedule(std::string_view name);
std::string_view dedup_schedule_name(DedupSchedule s);

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::Uniform;
  SwilConfig swil;
  GraspConfig grasp;
  AsvConfig asv;
  // Images whose similarity distribution has normalized entropy at or above
  // this route to the balanced path (adaptive algorithm only).
  double adaptive_entropy_threshold = 0.95;

  bool uses_swil() const;
  bool uses_grasp() const;
  bool uses_asv() const;
  bool uses_precomputed_left() const;
  // candidate_count, with 0 resolved to the algorithm default: 168 when the
  // left term is computed per batch, 352 when it is precomputed.
  std::size_t resolved_candidate_count() const;
  // Throws ConfigError on out-of-range parameters.
  void validate() const;
};

// Deduplication window state. replayed holds the ids retrieved in the
// current window; the None schedule records nothing, so its set stays empty.
struct DedupState {
  std::unordered_set<SampleId> replayed;
  std::size_t replays_since_clear = 0;
  std::uint64_t window_generation = 0;  // bumped on every clear
};

enum class WindowEvent { ReplayRecorded, EpochEnd, DatasetEnd };

// Window bookkeeping: PerEpoch clears on EpochEnd, PerDataset on DatasetEnd,
// BufferThird once the replays recorded since the last clear reach
// ceil(buffer_size / 3). None never clears because it never accumulates.
void advance_window(DedupState& state, WindowEvent event,
                    DedupSchedule schedule, std::size_t buffer_size);

// Per-position eligibility under the window: eligible iff not in
// state.replayed.
std::vector<std::uint8_t> dedup_mask(const DedupState& state,
                                     const ReplayBuffer& buffer);

enum class RoutePath { Swil, Grasp };

// Adaptive routing: compute the image's similarity distribution over buffer
// classes; entropy at or above the threshold (the distribution carries no
// signal) routes to the balanced path. A single-class buffer always routes
// balanced for the same reason.
RoutePath adaptive_route(const BatchImage& image, const ReplayBuffer& buffer,
                         const AlgorithmSpec& spec);

// What to replay alongside one batch: the chosen sample ids (no duplicates)
// and the weight on the replay loss term.
struct RetrievalPlan {
  std::vector<SampleId> sample_ids;
  double replay_weight = 1.0;
};

struct EngineOptions {
  // When a window empties mid-stream, clear it early instead of throwing
  // (and widen a too-small similarity-restricted candidate pool to all
  // eligible samples).
  bool allow_fallback = true;
  // Emit every trace_rate-th per-image distribution record; 0 disables
  // distribution records. Rank events are always emitted when a sink is set.
  std::size_t trace_rate = 50;
};

// Stateful composition of the primitives: owns the balanced cursor and the
// dedup window, produces one RetrievalPlan per batch. One engine instance
// serves one buffer, which must outlive it; calls are serialized by the
// caller.
class RetrievalEngine {
 public:
  RetrievalEngine(AlgorithmSpec spec, DedupSchedule schedule,
                  EngineOptions opts = {});

  void set_loss_adaptivity(const LossAdaptConfig& cfg) { loss_adapt_ = cfg; }
  void set_trace_sink(TraceSink* sink) { sink_ = sink; }  // not owned
  // Supplies the buffer-wide left term (ascending id order) for the
  // precomputed variants; otherwise it is computed on first use.
  void set_precomputed_left(std::vector<double> left);

  RetrievalPlan retrieve(const BatchContext& batch, const ReplayBuffer& buffer,
                         Rng& rng, const BatchCoords& coords = {});
  void end_epoch();
  void end_dataset();

  const DedupState& window() const { return state_; }
  std::size_t early_window_clears() const { return early_clears_; }

 private:
  void bind(const ReplayBuffer& buffer);
  void refresh_eligibility();
  void clear_window_early();
  bool selectable(std::size_t pos) const {
    return eligible_[pos] && !plan_mask_[pos];
  }
  void commit(std::size_t pos, RetrievalPlan& plan);

  std::size_t pick_uniform_global(Rng& rng);
  std::size_t pick_from_class(std::size_t class_pos, bool prototype_weighted,
                              const BatchCoords& coords, std::size_t image,
                              Rng& rng);
  std::size_t balanced_pick(bool prototype_weighted, const BatchCoords& coords,
                            std::size_t image, Rng& rng);
  // Masked similarity-weighted class draw for one image; distances are the
  // image's per-class values from swil_class_distances.
  std::size_t swil_class_pick(std::span<const double> distances,
                              const BatchCoords& coords, std::size_t image,
                              Rng& rng);
  void trace_distribution(const char* source, const BatchCoords& coords,
                          std::size_t image, std::vector<double> probs);
  bool trace_due();

  AlgorithmSpec spec_;
  DedupSchedule schedule_;
  EngineOptions opts_;
  LossAdaptConfig loss_adapt_;
  TraceSink* sink_ = nullptr;

  const ReplayBuffer* buffer_ = nullptr;
  DedupState state_;
  BalancedCursor cursor_;
  std::vector<double> left_terms_;
  bool left_ready_ = false;

  std::vector<std::uint8_t> eligible_;   // !replayed, by position
  std::vector<std::uint8_t> plan_mask_;  // committed in the current plan
  std::vector<std::size_t> class_selectable_;  // by class position
  std::size_t selectable_count_ = 0;
  std::size_t early_clears_ = 0;
  std::size_t trace_counter_ = 0;
};

}  // namespace replay
