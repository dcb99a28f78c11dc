#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "replay/trace.hpp"

namespace replay {

// Histogram of record entropies over [0, 1] plus the extreme records
// themselves (the run's least/most selective distributions).
struct EntropyHistogram {
  std::vector<std::size_t> counts;  // bins partition [0, 1]; 1.0 lands in the top bin
  std::size_t total = 0;
  DistributionRecord min_record;
  DistributionRecord median_record;  // lower median by entropy
  DistributionRecord max_record;
};

// Requires at least one record and one bin; throws std::invalid_argument.
EntropyHistogram entropy_histogram(std::span<const DistributionRecord> records,
                                   std::size_t bins);

// 1-based position of entry lowest_index when candidates are sorted by
// ascending distance (ties keep input order, so equal-distance candidates
// before it count ahead of it).
std::size_t distance_rank(std::span<const double> candidate_distances,
                          std::size_t lowest_index);

// Histogram over event ranks; counts[r - 1] = number of events with rank r.
std::vector<std::size_t> distance_rank_histogram(
    std::span<const RankEvent> events);
// Same, from raw (distances, lowest-score index) trace entries.
std::vector<std::size_t> distance_rank_histogram(
    std::span<const std::pair<std::vector<double>, std::size_t>> entries);

// Pearson correlation over (size, metric delta) points. Requires >= 3 points
// and nonzero variance on both axes; throws std::invalid_argument otherwise.
double size_forgetting_correlation(
    std::span<const std::pair<double, double>> points);

// CSV emission, one header row first, units spelled out in the column names.
void write_entropy_histogram_csv(
    std::ostream& out,
    std::span<const std::pair<std::string, EntropyHistogram>> by_source);
void write_distance_rank_csv(std::ostream& out,
                             std::span<const std::size_t> counts);
void write_dataset_summaries_csv(std::ostream& out,
                                 std::span<const DatasetReport> datasets);
// Per-dataset rows plus one trailing summary row holding the Pearson
// coefficient of images vs. class_replay_cv (the forgetting proxy).
void write_correlation_csv(std::ostream& out,
                           std::span<const DatasetReport> datasets,
                           double pearson_r);

}  // namespace replay
