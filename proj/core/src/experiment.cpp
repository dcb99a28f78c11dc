#include "replay/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

namespace replay {

namespace {

using json = nlohmann::ordered_json;

// Engine-side sink: forwards every record to the user's sink and collects
// what the report needs (entropy values per source, rank counts).
class Accumulator : public TraceSink {
 public:
  explicit Accumulator(TraceSink* forward) : forward_(forward) {}

  void on_distribution(const DistributionRecord& rec) override {
    if (forward_) forward_->on_distribution(rec);
    entropies_[rec.source].push_back(rec.entropy);
  }

  void on_distance_rank(const RankEvent& ev) override {
    if (forward_) forward_->on_distance_rank(ev);
    if (ev.rank > rank_counts_.size()) rank_counts_.resize(ev.rank, 0);
    ++rank_counts_[ev.rank - 1];
    ++rank_events_;
  }

  void on_dataset_summary(const DatasetReport& rep) override {
    if (forward_) forward_->on_dataset_summary(rep);
  }

  void finalize(RunReport& report) {
    for (auto& [source, values] : entropies_) {
      std::sort(values.begin(), values.end());
      EntropySummary s;
      s.count = values.size();
      s.min = values.front();
      s.median = values[(values.size() - 1) / 2];
      s.max = values.back();
      report.entropy.emplace(source, s);
    }
    report.distance_rank_counts = std::move(rank_counts_);
    report.rank_events = rank_events_;
  }

 private:
  TraceSink* forward_;
  std::map<std::string, std::vector<double>> entropies_;
  std::vector<std::size_t> rank_counts_;
  std::size_t rank_events_ = 0;
};

json coords_json(const char* kind, const BatchCoords& at) {
  json j;
  j["kind"] = kind;
  j["dataset"] = at.dataset;
  j["epoch"] = at.epoch;
  j["batch"] = at.batch;
  return j;
}

}  // namespace

void JsonlTraceWriter::on_distribution(const DistributionRecord& rec) {
  json j = coords_json("distribution", rec.at);
  j["source"] = rec.source;
  j["image"] = rec.image;
  j["entropy"] = rec.entropy;
  j["probs"] = rec.probs;
  out_ << j.dump() << '\n';
}

void JsonlTraceWriter::on_distance_rank(const RankEvent& ev) {
  json j = coords_json("distance_rank", ev.at);
  j["image"] = ev.image;
  j["rank"] = ev.rank;
  j["num_candidates"] = ev.num_candidates;
  out_ << j.dump() << '\n';
}

void JsonlTraceWriter::on_dataset_summary(const DatasetReport& rep) {
  json j;
  j["kind"] = "dataset_summary";
  j["dataset"] = rep.index;
  j["images"] = rep.images;
  j["replays"] = rep.replays;
  j["duplicates"] = rep.duplicates;
  j["coverage"] = rep.coverage;
  j["replay_fraction"] = rep.replay_fraction;
  j["class_replay_cv"] = rep.class_replay_cv;
  out_ << j.dump() << '\n';
}

RunReport run_experiment(const SyntheticStream& stream,
                         const ReplayBuffer& buffer, const AlgorithmSpec& spec,
                         DedupSchedule schedule, const LossAdaptConfig& la,
                         const ExperimentOptions& opts) {
  Accumulator acc(opts.sink);
  EngineOptions eopts;
  eopts.allow_fallback = opts.allow_fallback;
  eopts.trace_rate = opts.trace_rate;
  RetrievalEngine engine(spec, schedule, eopts);
  engine.set_loss_adaptivity(la);
  engine.set_trace_sink(&acc);
  Rng rng(mix_seed(stream.config().seed, 1));

  RunReport report;
  report.algorithm = std::string(algorithm_name(spec.algorithm));
  report.dedup = std::string(dedup_schedule_name(schedule));
  report.buffer_size = buffer.size();

  // Independent replica of the window accounting, used purely to COUNT
  // duplicates; the None schedule is audited per dataset by convention.
  std::unordered_set<SampleId> window_seen;
  std::size_t window_count = 0;
  const std::size_t third = (buffer.size() + 2) / 3;

  double fraction_sum = 0.0;
  std::size_t total_batches = 0;
  double time_sum_ms = 0.0;
  double time_max_ms = 0.0;

  for (std::size_t d = 0; d < stream.num_datasets(); ++d) {
    DatasetReport rep;
    rep.index = d;
    std::unordered_set<SampleId> distinct;
    std::vector<std::size_t> class_counts(buffer.num_classes(), 0);
    double dataset_fraction_sum = 0.0;
    std::size_t dataset_batches = 0;

    for (std::size_t e = 0; e < stream.epochs_per_dataset(); ++e) {
      for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) {
        const BatchContext batch = stream.batch(d, e, b);
        const auto t0 = std::chrono::steady_clock::now();
        const RetrievalPlan plan =
            engine.retrieve(batch, buffer, rng, BatchCoords{d, e, b});
        if (opts.measure_time) {
          const auto t1 = std::chrono::steady_clock::now();
          const double ms =
              std::chrono::duration<double, std::milli>(t1 - t0).count();
          time_sum_ms += ms;
          time_max_ms = std::max(time_max_ms, ms);
        }
        rep.images += batch.images.size();
        rep.replays += plan.sample_ids.size();
        const double fraction = static_cast<double>(plan.sample_ids.size()) /
                                static_cast<double>(batch.images.size());
        fraction_sum += fraction;
        dataset_fraction_sum += fraction;
        ++total_batches;
        ++dataset_batches;

        for (SampleId id : plan.sample_ids) {
          if (window_seen.count(id)) {
            ++rep.duplicates;
            ++report.duplicates_total;
          }
          window_seen.insert(id);
          ++window_count;
          if (schedule == DedupSchedule::BufferThird && window_count >= third) {
            window_seen.clear();
            window_count = 0;
          }
          distinct.insert(id);
          const BufferSample& s = buffer.sample_at(buffer.position_of(id));
          for (const auto& [cls, embs] : s.class_embeddings) {
            ++class_counts[buffer.class_position(cls)];
          }
        }
      }
      engine.end_epoch();
      if (schedule == DedupSchedule::PerEpoch) {
        window_seen.clear();
        window_count = 0;
      }
    }
    engine.end_dataset();
    if (schedule == DedupSchedule::PerDataset ||
        schedule == DedupSchedule::None) {
      window_seen.clear();
      window_count = 0;
    }

    rep.coverage = static_cast<double>(distinct.size()) /
                   static_cast<double>(buffer.size());
    rep.replay_fraction =
        dataset_fraction_sum / static_cast<double>(dataset_batches);
    double mean = 0.0;
    for (std::size_t n : class_counts) mean += static_cast<double>(n);
    mean /= static_cast<double>(class_counts.size());
    double var = 0.0;
    for (std::size_t n : class_counts) {
      const double dlt = static_cast<double>(n) - mean;
      var += dlt * dlt;
    }
    var /= static_cast<double>(class_counts.size());
    rep.class_replay_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;

    acc.on_dataset_summary(rep);
    report.per_dataset.push_back(rep);
  }

  report.realized_replay_fraction =
      fraction_sum / static_cast<double>(total_batches);
  report.early_window_clears = engine.early_window_clears();
  report.timing.measured = opts.measure_time;
  report.timing.batches = total_batches;
  if (opts.measure_time) {
    report.timing.mean_ms_per_batch =
        time_sum_ms / static_cast<double>(total_batches);
    report.timing.max_ms_per_batch = time_max_ms;
  }
  acc.finalize(report);
  return report;
}

RunReport run_experiment(const SyntheticStream& stream,
                         const AlgorithmSpec& spec, DedupSchedule schedule,
                         const LossAdaptConfig& la,
                         const BufferSelectionConfig& buffer_cfg,
                         const ExperimentOptions& opts) {
  const ReplayBuffer buffer = select_buffer(stream.pool(), buffer_cfg);
  return run_experiment(stream, buffer, spec, schedule, la, opts);
}

std::string run_report_json(const RunReport& report) {
  json j;
  j["algorithm"] = report.algorithm;
  j["dedup"] = report.dedup;
  j["buffer_size"] = report.buffer_size;
  j["realized_replay_fraction"] = report.realized_replay_fraction;
  j["duplicates_total"] = report.duplicates_total;
  j["early_window_clears"] = report.early_window_clears;
  json datasets = json::array();
  for (const DatasetReport& rep : report.per_dataset) {
    json r;
    r["dataset"] = rep.index;
    r["images"] = rep.images;
    r["replays"] = rep.replays;
    r["duplicates"] = rep.duplicates;
    r["coverage"] = rep.coverage;
    r["replay_fraction"] = rep.replay_fraction;
    r["class_replay_cv"] = rep.class_replay_cv;
    datasets.push_back(std::move(r));
  }
  j["per_dataset"] = std::move(datasets);
  json entropy = json::object();
  for (const auto& [source, s] : report.entropy) {
    json e;
    e["count"] = s.count;
    e["min"] = s.min;
    e["median"] = s.median;
    e["max"] = s.max;
    entropy[source] = std::move(e);
  }
  j["entropy"] = std::move(entropy);
  json ranks;
  ranks["events"] = report.rank_events;
  ranks["counts"] = report.distance_rank_counts;
  j["distance_ranks"] = std::move(ranks);
  json timing;
  timing["measured"] = report.timing.measured;
  timing["mean_ms_per_batch"] = report.timing.mean_ms_per_batch;
  timing["max_ms_per_batch"] = report.timing.max_ms_per_batch;
  timing["batches"] = report.timing.batches;
  j["timing"] = std::move(timing);
  return j.dump(2) + "\n";
}

}  // namespace replay
