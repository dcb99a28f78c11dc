#include "replay/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace replay {

namespace {

// Shortest representation that parses back to the same double; keeps CSV
// output deterministic across runs.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

EntropyHistogram entropy_histogram(std::span<const DistributionRecord> records,
                                   std::size_t bins) {
  if (records.empty()) {
    throw std::invalid_argument("entropy_histogram: no records");
  }
  if (bins == 0) {
    throw std::invalid_argument("entropy_histogram: needs at least one bin");
  }
  EntropyHistogram hist;
  hist.counts.assign(bins, 0);
  hist.total = records.size();
  for (const DistributionRecord& rec : records) {
    const double h = std::clamp(rec.entropy, 0.0, 1.0);
    const std::size_t bin = std::min(
        bins - 1, static_cast<std::size_t>(h * static_cast<double>(bins)));
    ++hist.counts[bin];
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].entropy != records[b].entropy) {
      return records[a].entropy < records[b].entropy;
    }
    return a < b;
  });
  hist.min_record = records[order.front()];
  hist.median_record = records[order[(order.size() - 1) / 2]];
  hist.max_record = records[order.back()];
  return hist;
}

std::size_t distance_rank(std::span<const double> candidate_distances,
                          std::size_t lowest_index) {
  if (candidate_distances.empty()) {
    throw std::invalid_argument("distance_rank: no candidates");
  }
  if (lowest_index >= candidate_distances.size()) {
    throw std::invalid_argument("distance_rank: index out of range");
  }
  const double ref = candidate_distances[lowest_index];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < candidate_distances.size(); ++i) {
    if (candidate_distances[i] < ref ||
        (candidate_distances[i] == ref && i < lowest_index)) {
      ++rank;
    }
  }
  return rank;
}

std::vector<std::size_t> distance_rank_histogram(
    std::span<const RankEvent> events) {
  std::vector<std::size_t> counts;
  for (const RankEvent& ev : events) {
    if (ev.rank == 0) {
      throw std::invalid_argument("distance_rank_histogram: rank must be 1-based");
    }
    if (ev.rank > counts.size()) counts.resize(ev.rank, 0);
    ++counts[ev.rank - 1];
  }
  return counts;
}

std::vector<std::size_t> distance_rank_histogram(
    std::span<const std::pair<std::vector<double>, std::size_t>> entries) {
  std::vector<std::size_t> counts;
  for (const auto& [distances, lowest] : entries) {
    const std::size_t rank = distance_rank(distances, lowest);
    if (rank > counts.size()) counts.resize(rank, 0);
    ++counts[rank - 1];
  }
  return counts;
}

double size_forgetting_correlation(
    std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) {
    throw std::invalid_argument(
        "size_forgetting_correlation: needs at least 3 points");
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument(
        "size_forgetting_correlation: degenerate variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

void write_entropy_histogram_csv(
    std::ostream& out,
    std::span<const std::pair<std::string, EntropyHistogram>> by_source) {
  out << "source,bin_index,bin_low_normalized_entropy_unitless,"
         "bin_high_normalized_entropy_unitless,count_records\n";
  for (const auto& [source, hist] : by_source) {
    const double bins = static_cast<double>(hist.counts.size());
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      out << source << ',' << i << ','
          << fmt(static_cast<double>(i) / bins) << ','
          << fmt(static_cast<double>(i + 1) / bins) << ',' << hist.counts[i]
          << '\n';
    }
  }
}

void write_distance_rank_csv(std::ostream& out,
                             std::span<const std::size_t> counts) {
  out << "rank_ascending_distance_1based,count_events\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << (i + 1) << ',' << counts[i] << '\n';
  }
}

void write_dataset_summaries_csv(std::ostream& out,
                                 std::span<const DatasetReport> datasets) {
  out << "dataset_index,images_count,replays_count,duplicates_count,"
         "coverage_fraction_unitless,replay_fraction_unitless,"
         "class_replay_cv_unitless\n";
  for (const DatasetReport& rep : datasets) {
    out << rep.index << ',' << rep.images << ',' << rep.replays << ','
        << rep.duplicates << ',' << fmt(rep.coverage) << ','
        << fmt(rep.replay_fraction) << ',' << fmt(rep.class_replay_cv) << '\n';
  }
}

void write_correlation_csv(std::ostream& out,
                           std::span<const DatasetReport> datasets,
                           double pearson_r) {
  out << "row_kind,dataset_index,images_count,class_replay_cv_unitless,"
         "pearson_r_unitless\n";
  for (const DatasetReport& rep : datasets) {
    out << "data," << rep.index << ',' << rep.images << ','
        << fmt(rep.class_replay_cv) << ",\n";
  }
  out << "summary,,,," << fmt(pearson_r) << '\n';
}

}  // namespace replay
