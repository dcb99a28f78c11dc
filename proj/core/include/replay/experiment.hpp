#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "replay/buffer.hpp"
#include "replay/engine.hpp"
#include "replay/stream.hpp"
#include "replay/trace.hpp"

namespace replay {

struct ExperimentOptions {
  std::size_t trace_rate = 50;  // forwarded to the engine
  bool measure_time = true;     // false zeroes wall-time fields for bit-stable reports
  bool allow_fallback = true;
  TraceSink* sink = nullptr;  // receives every trace record; not owned
};

struct EntropySummary {
  std::size_t count = 0;
  double min = 0.0;
  double median = 0.0;  // lower median of the recorded entropies
  double max = 0.0;
};

struct TimingReport {
  bool measured = false;
  double mean_ms_per_batch = 0.0;
  double max_ms_per_batch = 0.0;
  std::size_t batches = 0;
};

// Everything a run reports: per-dataset replay accounting, entropy summaries
// per distribution source, the distance-rank histogram of the adversarial
// path, the realized replay fraction, and retrieval wall time.
struct RunReport {
  std::string algorithm;
  std::string dedup;
  std::size_t buffer_size = 0;
  std::vector<DatasetReport> per_dataset;
  std::map<std::string, EntropySummary> entropy;
  std::vector<std::size_t> distance_rank_counts;  // index = rank - 1
  std::size_t rank_events = 0;
  double realized_replay_fraction = 0.0;  // mean over batches of r / |B|
  std::size_t duplicates_total = 0;
  std::size_t early_window_clears = 0;
  TimingReport timing;
};

// Deterministic JSON rendering (fixed key order, shortest round-trip floats).
std::string run_report_json(const RunReport& report);

// Runs the full stream against one algorithm/schedule/adaptivity choice.
// Engine draws come from a generator seeded from the stream seed, so a run is
// a pure function of (stream config, spec, schedule, la, options.trace_rate).
RunReport run_experiment(const SyntheticStream& stream,
                         const ReplayBuffer& buffer, const AlgorithmSpec& spec,
                         DedupSchedule schedule, const LossAdaptConfig& la,
                         const ExperimentOptions& opts = {});

// Convenience: builds the buffer from the stream's pool first.
RunReport run_experiment(const SyntheticStream& stream,
                         const AlgorithmSpec& spec, DedupSchedule schedule,
                         const LossAdaptConfig& la,
                         const BufferSelectionConfig& buffer_cfg = {},
                         const ExperimentOptions& opts = {});

// Writes each trace record as one JSON line with a "kind" discriminator,
// matching load_trace_jsonl.
class JsonlTraceWriter : public TraceSink {
 public:
  explicit JsonlTraceWriter(std::ostream& out) : out_(out) {}
  void on_distribution(const DistributionRecord& rec) override;
  void on_distance_rank(const RankEvent& ev) override;
  void on_dataset_summary(const DatasetReport& rep) override;

 private:
  std::ostream& out_;
};

}  // namespace replay
