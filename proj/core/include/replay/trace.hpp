#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace replay {

// Where a traced event happened inside a run.
struct BatchCoords {
  std::size_t dataset = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

// A class-selection distribution actually sampled from during retrieval.
// source names the primitive that produced it ("swil" or "grasp"); for
// "grasp" the probabilities range over the members of the selected class,
// for "swil" over the buffer's classes in ascending-id order.
struct DistributionRecord {
  std::string source;
  BatchCoords at;
  std::size_t image = 0;
  std::vector<double> probs;
  double entropy = 0.0;  // normalized to [0, 1]
};

// For one batch image scored by the adversarial-value path: the 1-based rank,
// in ascending cosine distance over the candidate set, of the candidate with
// the lowest contribution score (ties on distance broken by lower sample id).
struct RankEvent {
  BatchCoords at;
  std::size_t image = 0;
  std::size_t rank = 0;
  std::size_t num_candidates = 0;
};

// Per-dataset run summary, emitted once per dataset into traces and collected
// into the run report.
struct DatasetReport {
  std::size_t index = 0;
  std::size_t images = 0;      // new-task images shown
  std::size_t replays = 0;     // replayed samples drawn
  std::size_t duplicates = 0;  // repeats within a deduplication window
  double coverage = 0.0;       // distinct replayed samples / buffer size
  double replay_fraction = 0.0;   // mean per-batch replay count / batch size
  double class_replay_cv = 0.0;   // coefficient of variation of per-class use
};

// Receives trace events during a run. Default hooks drop everything, so a
// sink overrides only what it needs.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void on_distribution(const DistributionRecord&) {}
  virtual void on_distance_rank(const RankEvent&) {}
  virtual void on_dataset_summary(const DatasetReport&) {}
};

}  // namespace replay
