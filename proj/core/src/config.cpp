#include "replay/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "replay/errors.hpp"

namespace replay {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad(std::string_view origin, std::size_t line,
                      const std::string& what) {
  throw ConfigError(std::string(origin) + ":" + std::to_string(line) + ": " +
                    what);
}

std::uint64_t parse_u64(std::string_view origin, std::size_t line,
                        std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || value.empty()) {
    bad(origin, line,
        std::string(key) + " needs a nonnegative integer, got '" +
            std::string(value) + "'");
  }
  return out;
}

double parse_double(std::string_view origin, std::size_t line,
                    std::string_view key, std::string_view value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || value.empty()) {
    bad(origin, line,
        std::string(key) + " needs a number, got '" + std::string(value) +
            "'");
  }
  return out;
}

bool parse_bool(std::string_view origin, std::size_t line,
                std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(origin, line,
      std::string(key) + " needs true/false, got '" + std::string(value) +
          "'");
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text,
                                   std::string_view origin) {
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  // Lines where algorithm-specific keys appeared, for the relevance check
  // below (it can only run once the algorithm itself is known).
  std::size_t line_no = 0;

  std::string_view rest = text;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line =
        nl == std::string_view::npos ? rest : rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{}
                                        : rest.substr(nl + 1);
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      bad(origin, line_no, "expected key=value, got '" + std::string(line) +
                               "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) bad(origin, line_no, "empty key");
    if (!seen.insert(std::string(key)).second) {
      bad(origin, line_no, "duplicate key '" + std::string(key) + "'");
    }

    if (key == "num_buffer_classes") {
      cfg.stream.num_buffer_classes =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "samples_per_class") {
      cfg.stream.samples_per_class =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "embedding_dim") {
      cfg.stream.embedding_dim =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "num_datasets") {
      cfg.stream.num_datasets =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "batches_per_epoch") {
      cfg.stream.batches_per_epoch =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "epochs_per_dataset") {
      cfg.stream.epochs_per_dataset =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "batch_size") {
      cfg.stream.batch_size =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "cluster_spread") {
      cfg.stream.cluster_spread = parse_double(origin, line_no, key, value);
    } else if (key == "task_overlap") {
      cfg.stream.task_overlap = parse_double(origin, line_no, key, value);
    } else if (key == "seed") {
      cfg.stream.seed = parse_u64(origin, line_no, key, value);
    } else if (key == "loss_decay") {
      cfg.stream.loss_decay = parse_double(origin, line_no, key, value);
    } else if (key == "batch_top_k") {
      cfg.stream.batch_top_k =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "loss_threshold") {
      cfg.buffer.loss_threshold = parse_double(origin, line_no, key, value);
    } else if (key == "class_floor") {
      cfg.buffer.class_floor =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "algorithm") {
      cfg.spec.algorithm = parse_algorithm(std::string(value));
    } else if (key == "dedup") {
      cfg.dedup = parse_dedup_schedule(std::string(value));
    } else if (key == "swil_w") {
      cfg.spec.swil.w = parse_double(origin, line_no, key, value);
    } else if (key == "grasp_w") {
      cfg.spec.grasp.w = parse_double(origin, line_no, key, value);
    } else if (key == "asv_c") {
      cfg.spec.asv.c = parse_double(origin, line_no, key, value);
    } else if (key == "asv_k") {
      cfg.spec.asv.knn_k =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "asv_candidates") {
      cfg.spec.asv.candidate_count =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "adaptive_entropy_threshold") {
      cfg.spec.adaptive_entropy_threshold =
          parse_double(origin, line_no, key, value);
    } else if (key == "loss_adapt_threshold") {
      cfg.loss_adapt.enabled = true;
      cfg.loss_adapt.threshold = parse_double(origin, line_no, key, value);
    } else if (key == "trace_rate") {
      cfg.trace_rate =
          static_cast<std::size_t>(parse_u64(origin, line_no, key, value));
    } else if (key == "measure_time") {
      cfg.measure_time = parse_bool(origin, line_no, key, value);
    } else if (key == "allow_fallback") {
      cfg.allow_fallback = parse_bool(origin, line_no, key, value);
    } else {
      bad(origin, line_no, "unknown key '" + std::string(key) + "'");
    }
  }

  // A tuning key for a primitive the chosen algorithm never runs is almost
  // certainly a typo'd experiment; refuse rather than silently ignore.
  const std::string name(algorithm_name(cfg.spec.algorithm));
  auto irrelevant = [&](std::string_view key, bool used,
                        const char* role) {
    if (seen.count(key) && !used) {
      throw ConfigError(std::string(origin) + ": " + std::string(key) +
                        " is set but algorithm '" + name + "' has no " + role);
    }
  };
  irrelevant("swil_w", cfg.spec.uses_swil(),
             "similarity-weighted class step");
  irrelevant("grasp_w", cfg.spec.uses_grasp(),
             "prototype-weighted sample step");
  irrelevant("asv_c", cfg.spec.uses_asv(), "adversarial-value sample step");
  irrelevant("asv_k", cfg.spec.uses_asv(), "adversarial-value sample step");
  irrelevant("asv_candidates", cfg.spec.uses_asv(),
             "adversarial-value sample step");
  irrelevant("adaptive_entropy_threshold",
             cfg.spec.algorithm == Algorithm::AdaptiveSwGrasp,
             "entropy-routed class step");

  cfg.stream.validate();
  cfg.spec.validate();
  if (!std::isfinite(cfg.buffer.loss_threshold) ||
      cfg.buffer.loss_threshold <= 0.0) {
    throw ConfigError(std::string(origin) +
                      ": loss_threshold must be finite and positive");
  }
  if (cfg.buffer.class_floor == 0) {
    throw ConfigError(std::string(origin) + ": class_floor must be positive");
  }
  if (cfg.loss_adapt.enabled &&
      (!std::isfinite(cfg.loss_adapt.threshold) ||
       cfg.loss_adapt.threshold < 0.0)) {
    throw ConfigError(std::string(origin) +
                      ": loss_adapt_threshold must be finite and >= 0");
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace replay
