// Command-line front end: build a replay buffer from a sample pool, cache the
// adversarial left term, run a configured experiment, and turn trace files
// into CSV summaries.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "replay/analysis.hpp"
#include "replay/buffer.hpp"
#include "replay/config.hpp"
#include "replay/engine.hpp"
#include "replay/errors.hpp"
#include "replay/experiment.hpp"
#include "replay/io.hpp"
#include "replay/sample_selection.hpp"
#include "replay/stream.hpp"

namespace {

struct BuildBufferArgs {
  std::string pool_path;
  std::string buffer_path;
  double loss_threshold = 0.15;
  std::size_t class_floor = 50;
};

int cmd_build_buffer(const BuildBufferArgs& args) {
  const std::vector<replay::BufferSample> pool =
      replay::load_samples_jsonl(args.pool_path);
  replay::BufferSelectionConfig cfg;
  cfg.loss_threshold = args.loss_threshold;
  cfg.class_floor = args.class_floor;
  const replay::ReplayBuffer buffer = replay::select_buffer(pool, cfg);
  replay::save_buffer_jsonl(buffer, args.buffer_path);
  std::cerr << "kept " << buffer.size() << " of " << pool.size()
            << " samples across " << buffer.num_classes() << " classes\n";
  return 0;
}

struct PrecomputeArgs {
  std::string buffer_path;
  std::string out_path;
  std::size_t k_nearest = 20;
};

int cmd_precompute_left(const PrecomputeArgs& args) {
  const replay::ReplayBuffer buffer =
      replay::load_buffer_jsonl(args.buffer_path);
  const std::vector<double> left =
      replay::precompute_left_term(buffer, args.k_nearest);
  replay::save_left_terms(args.out_path, left,
                          replay::buffer_content_hash(buffer));
  std::cerr << "wrote " << left.size() << " left-term values (K = "
            << args.k_nearest << ")\n";
  return 0;
}

struct RunArgs {
  std::string config_path;
  std::string algorithm;
  std::string dedup;
  double loss_adapt_threshold = 0.0;
  bool loss_adapt_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string trace_out;
  std::string report_out;
};

int cmd_run(const RunArgs& args) {
  replay::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = replay::parse_config_file(args.config_path);
  }
  // Flags override the file.
  if (!args.algorithm.empty()) {
    cfg.spec.algorithm = replay::parse_algorithm(args.algorithm);
  }
  if (!args.dedup.empty()) {
    cfg.dedup = replay::parse_dedup_schedule(args.dedup);
  }
  if (args.loss_adapt_set) {
    cfg.loss_adapt.enabled = true;
    cfg.loss_adapt.threshold = args.loss_adapt_threshold;
  }
  if (args.seed_set) cfg.stream.seed = args.seed;

  const replay::SyntheticStream stream =
      replay::SyntheticStream::generate(cfg.stream);

  std::ofstream trace_file;
  std::unique_ptr<replay::JsonlTraceWriter> writer;
  if (!args.trace_out.empty()) {
    trace_file.open(args.trace_out, std::ios::binary);
    if (!trace_file) {
      throw replay::ConfigError("cannot open trace output '" +
                                args.trace_out + "'");
    }
    writer = std::make_unique<replay::JsonlTraceWriter>(trace_file);
  }

  replay::ExperimentOptions opts;
  opts.trace_rate = cfg.trace_rate;
  opts.measure_time = cfg.measure_time;
  opts.allow_fallback = cfg.allow_fallback;
  opts.sink = writer.get();

  const replay::RunReport report = replay::run_experiment(
      stream, cfg.spec, cfg.dedup, cfg.loss_adapt, cfg.buffer, opts);
  const std::string json = replay::run_report_json(report);
  if (args.report_out.empty()) {
    std::cout << json;
  } else {
    std::ofstream out(args.report_out, std::ios::binary);
    if (!out) {
      throw replay::ConfigError("cannot open report output '" +
                                args.report_out + "'");
    }
    out << json;
  }
  return 0;
}

struct AnalyzeArgs {
  std::string trace_path;
  std::string out_dir = ".";
  std::size_t bins = 20;
};

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw replay::ConfigError("cannot open output '" + path.string() + "'");
  }
  return out;
}

int cmd_analyze(const AnalyzeArgs& args) {
  if (args.bins == 0) {
    throw replay::ConfigError("--bins must be positive");
  }
  const replay::TraceData trace = replay::load_trace_jsonl(args.trace_path);
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);

  // Entropy histogram per distribution source.
  std::map<std::string, std::vector<replay::DistributionRecord>> by_source;
  for (const replay::DistributionRecord& rec : trace.distributions) {
    by_source[rec.source].push_back(rec);
  }
  std::vector<std::pair<std::string, replay::EntropyHistogram>> histograms;
  for (const auto& [source, records] : by_source) {
    histograms.emplace_back(source,
                            replay::entropy_histogram(records, args.bins));
  }
  {
    std::ofstream out = open_csv(dir / "entropy_histogram.csv");
    replay::write_entropy_histogram_csv(out, histograms);
  }
  {
    std::ofstream out = open_csv(dir / "distance_ranks.csv");
    replay::write_distance_rank_csv(
        out, replay::distance_rank_histogram(trace.ranks));
  }
  {
    std::ofstream out = open_csv(dir / "dataset_summaries.csv");
    replay::write_dataset_summaries_csv(out, trace.datasets);
  }
  {
    // Size vs. class-replay-imbalance correlation; too few or degenerate
    // datasets get a header-only file rather than a failure.
    std::ofstream out = open_csv(dir / "correlation.csv");
    std::vector<std::pair<double, double>> points;
    for (const replay::DatasetReport& rep : trace.datasets) {
      points.emplace_back(static_cast<double>(rep.images),
                          rep.class_replay_cv);
    }
    try {
      const double r = replay::size_forgetting_correlation(points);
      replay::write_correlation_csv(out, trace.datasets, r);
    } catch (const std::invalid_argument& e) {
      out << "row_kind,dataset_index,images_count,class_replay_cv_unitless,"
             "pearson_r_unitless\n";
      std::cerr << "correlation not computable: " << e.what() << "\n";
    }
  }
  std::cerr << "analyzed " << trace.distributions.size() << " distributions, "
            << trace.ranks.size() << " rank events, " << trace.datasets.size()
            << " dataset summaries into " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective replay retrieval simulator"};
  app.require_subcommand(1);

  BuildBufferArgs bb;
  CLI::App* build = app.add_subcommand(
      "build-buffer", "Select a replay buffer from a sample pool (JSONL)");
  build->add_option("pool", bb.pool_path, "Input pool JSONL")->required();
  build->add_option("buffer", bb.buffer_path, "Output buffer JSONL")
      ->required();
  build->add_option("--loss-threshold", bb.loss_threshold,
                    "Keep only samples with loss strictly below this");
  build->add_option("--class-floor", bb.class_floor,
                    "Per-class sample quota (min with availability)");

  PrecomputeArgs pc;
  CLI::App* pre = app.add_subcommand(
      "precompute-left",
      "Cache the buffer-wide representativeness term as flat binary");
  pre->add_option("buffer", pc.buffer_path, "Input buffer JSONL")->required();
  pre->add_option("out", pc.out_path, "Output binary file")->required();
  pre->add_option("--K", pc.k_nearest, "K of the nearest-neighbor utility");

  RunArgs ra;
  CLI::App* run = app.add_subcommand(
      "run", "Run one experiment and print its report as JSON");
  run->add_option("--config", ra.config_path, "key=value config file");
  run->add_option("--algorithm", ra.algorithm,
                  "Retrieval algorithm (overrides config)");
  run->add_option("--dedup", ra.dedup,
                  "Dedup window: none|epoch|dataset|buffer-third");
  CLI::Option* la = run->add_option("--loss-adapt-threshold",
                                    ra.loss_adapt_threshold,
                                    "Enable loss adaptivity at this threshold");
  CLI::Option* seed =
      run->add_option("--seed", ra.seed, "Stream seed (overrides config)");
  run->add_option("--trace-out", ra.trace_out, "Write trace JSONL here");
  run->add_option("--report-out", ra.report_out,
                  "Write the report here instead of stdout");

  AnalyzeArgs an;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Summarize a trace JSONL into CSV files");
  analyze->add_option("trace", an.trace_path, "Input trace JSONL")->required();
  analyze->add_option("--out-dir", an.out_dir, "Directory for the CSV files");
  analyze->add_option("--bins", an.bins, "Entropy histogram bin count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) return cmd_build_buffer(bb);
    if (pre->parsed()) return cmd_precompute_left(pc);
    if (run->parsed()) {
      ra.loss_adapt_set = la->count() > 0;
      ra.seed_set = seed->count() > 0;
      return cmd_run(ra);
    }
    if (analyze->parsed()) return cmd_analyze(an);
  } catch (const replay::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const replay::ExhaustionError& e) {
    std::cerr << "exhaustion error: " << e.what() << "\n";
    return 3;
  } catch (const replay::DataFormatError& e) {
    std::cerr << "data format error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
