#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "replay/config.hpp"
#include "replay/errors.hpp"

using namespace replay;

TEST_CASE("every stream and buffer key lands in its field") {
  const std::string text =
      "num_buffer_classes = 7\n"
      "samples_per_class = 55\n"
      "embedding_dim = 12\n"
      "num_datasets = 4\n"
      "batches_per_epoch = 9\n"
      "epochs_per_dataset = 3\n"
      "batch_size = 5\n"
      "cluster_spread = 0.125\n"
      "task_overlap = 0.75\n"
      "seed = 123456789012345\n"
      "loss_decay = 0.9\n"
      "batch_top_k = 6\n"
      "loss_threshold = 0.2\n"
      "class_floor = 17\n"
      "algorithm = uniform\n"
      "dedup = buffer-third\n"
      "trace_rate = 25\n"
      "measure_time = false\n"
      "allow_fallback = false\n";
  const ExperimentConfig cfg = parse_config_text(text, "test");
  CHECK(cfg.stream.num_buffer_classes == 7);
  CHECK(cfg.stream.samples_per_class == 55);
  CHECK(cfg.stream.embedding_dim == 12);
  CHECK(cfg.stream.num_datasets == 4);
  CHECK(cfg.stream.batches_per_epoch == 9);
  CHECK(cfg.stream.epochs_per_dataset == 3);
  CHECK(cfg.stream.batch_size == 5);
  CHECK(cfg.stream.cluster_spread == 0.125);
  CHECK(cfg.stream.task_overlap == 0.75);
  CHECK(cfg.stream.seed == 123456789012345ull);
  CHECK(cfg.stream.loss_decay == 0.9);
  CHECK(cfg.stream.batch_top_k == 6);
  CHECK(cfg.buffer.loss_threshold == 0.2);
  CHECK(cfg.buffer.class_floor == 17);
  CHECK(cfg.spec.algorithm == Algorithm::Uniform);
  CHECK(cfg.dedup == DedupSchedule::BufferThird);
  CHECK(cfg.trace_rate == 25);
  CHECK_FALSE(cfg.measure_time);
  CHECK_FALSE(cfg.allow_fallback);
  CHECK_FALSE(cfg.loss_adapt.enabled);  // unset key leaves it off
}

TEST_CASE("algorithm tuning keys land in their fields") {
  const ExperimentConfig grasp = parse_config_text(
      "algorithm = A-SW-GRASP\n"
      "swil_w = 2.5\n"
      "grasp_w = 4.0\n"
      "adaptive_entropy_threshold = 0.9\n",
      "test");
  CHECK(grasp.spec.algorithm == Algorithm::AdaptiveSwGrasp);
  CHECK(grasp.spec.swil.w == 2.5);
  CHECK(grasp.spec.grasp.w == 4.0);
  CHECK(grasp.spec.adaptive_entropy_threshold == 0.9);

  const ExperimentConfig asv = parse_config_text(
      "algorithm = sw_aser_pc\n"
      "swil_w = 1.5\n"
      "asv_c = 0.3\n"
      "asv_k = 10\n"
      "asv_candidates = 200\n"
      "loss_adapt_threshold = 0.45\n",
      "test");
  CHECK(asv.spec.algorithm == Algorithm::SwAserPc);
  CHECK(asv.spec.swil.w == 1.5);
  CHECK(asv.spec.asv.c == 0.3);
  CHECK(asv.spec.asv.knn_k == 10);
  CHECK(asv.spec.asv.candidate_count == 200);
  CHECK(asv.loss_adapt.enabled);  // presence of the key switches it on
  CHECK(asv.loss_adapt.threshold == 0.45);
}

TEST_CASE("empty text keeps every default") {
  const ExperimentConfig cfg = parse_config_text("", "test");
  CHECK(cfg.stream.num_buffer_classes == 10);
  CHECK(cfg.stream.seed == 1);
  CHECK(cfg.buffer.loss_threshold == 0.15);
  CHECK(cfg.buffer.class_floor == 50);
  CHECK(cfg.spec.algorithm == Algorithm::Uniform);
  CHECK(cfg.dedup == DedupSchedule::PerDataset);
  CHECK_FALSE(cfg.loss_adapt.enabled);
  CHECK(cfg.trace_rate == 50);
  CHECK(cfg.measure_time);
  CHECK(cfg.allow_fallback);
}

TEST_CASE("comments, blanks, and whitespace are cosmetic") {
  const ExperimentConfig cfg = parse_config_text(
      "# run shape\n"
      "\n"
      "   \t  \n"
      "\tbatch_size\t=\t3\t\n"
      "  # indented comment\n"
      "seed=9\r\n",
      "test");
  CHECK(cfg.stream.batch_size == 3);
  CHECK(cfg.stream.seed == 9);
}

TEST_CASE("a zero loss-adapt threshold still enables adaptivity") {
  const ExperimentConfig cfg =
      parse_config_text("loss_adapt_threshold = 0.0\n", "test");
  CHECK(cfg.loss_adapt.enabled);
  CHECK(cfg.loss_adapt.threshold == 0.0);
}

TEST_CASE("parse errors name the origin and line") {
  CHECK_THROWS_WITH_AS(parse_config_text("wat = 1\n", "cfg"),
                       "cfg:1: unknown key 'wat'", ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("seed = 1\n# fine\nseed = 2\n", "cfg"),
      "cfg:3: duplicate key 'seed'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("just words\n", "cfg"),
                       "cfg:1: expected key=value, got 'just words'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("= 5\n", "cfg"), "cfg:1: empty key",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("seed = abc\n", "cfg"),
                       "cfg:1: seed needs a nonnegative integer, got 'abc'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("seed = -3\n", "cfg"),
                       "cfg:1: seed needs a nonnegative integer, got '-3'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = swil\nswil_w = fast\n", "cfg"),
      "cfg:2: swil_w needs a number, got 'fast'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("measure_time = maybe\n", "cfg"),
                       "cfg:1: measure_time needs true/false, got 'maybe'",
                       ConfigError);
}

TEST_CASE("tuning keys for an unused primitive are refused") {
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = uniform\nswil_w = 2.0\n", "cfg"),
      "cfg: swil_w is set but algorithm 'Uniform' has no "
      "similarity-weighted class step",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = swil\ngrasp_w = 2.0\n", "cfg"),
      "cfg: grasp_w is set but algorithm 'SWIL' has no "
      "prototype-weighted sample step",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = grasp\nasv_c = 0.2\n", "cfg"),
      "cfg: asv_c is set but algorithm 'GRASP' has no "
      "adversarial-value sample step",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("algorithm = aser\nadaptive_entropy_threshold = "
                        "0.5\n",
                        "cfg"),
      "cfg: adaptive_entropy_threshold is set but algorithm 'ASER' has no "
      "entropy-routed class step",
      ConfigError);

  // The key order does not matter: the check runs after the whole file.
  CHECK_THROWS_AS(
      parse_config_text("asv_k = 5\nalgorithm = uniform balanced\n", "cfg"),
      ConfigError);

  // The same keys pass when the algorithm uses them.
  CHECK_NOTHROW(parse_config_text("algorithm = swil\nswil_w = 2.0\n", "cfg"));
  CHECK_NOTHROW(
      parse_config_text("algorithm = aser\nasv_c = 0.2\n", "cfg"));
}

TEST_CASE("out-of-range values fail the final validation") {
  CHECK_THROWS_AS(parse_config_text("batch_size = 0\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("embedding_dim = 1\n", "cfg"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("task_overlap = 1.5\n", "cfg"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config_text("algorithm = grasp\ngrasp_w = 0.0\n", "cfg"),
      ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("loss_threshold = 0.0\n", "cfg"),
                       "cfg: loss_threshold must be finite and positive",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("class_floor = 0\n", "cfg"),
                       "cfg: class_floor must be positive", ConfigError);
  CHECK_THROWS_AS(parse_config_text("loss_adapt_threshold = -1\n", "cfg"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("algorithm = a-sw-grasp\n"
                                    "adaptive_entropy_threshold = 1.5\n",
                                    "cfg"),
                  ConfigError);
}

TEST_CASE("config files parse like inline text") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "replay_config_tests";
  fs::create_directories(dir);
  const fs::path path = dir / "run.cfg";
  {
    std::ofstream out(path);
    out << "algorithm = grasp\ngrasp_w = 2.0\nseed = 77\n";
  }
  const ExperimentConfig cfg = parse_config_file(path.string());
  CHECK(cfg.spec.algorithm == Algorithm::Grasp);
  CHECK(cfg.spec.grasp.w == 2.0);
  CHECK(cfg.stream.seed == 77);
  fs::remove(path);

  CHECK_THROWS_WITH_AS(parse_config_file((dir / "missing.cfg").string()),
                       ("cannot open config file '" +
                        (dir / "missing.cfg").string() + "'")
                           .c_str(),
                       ConfigError);
}
