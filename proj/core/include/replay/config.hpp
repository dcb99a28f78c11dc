#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "replay/buffer.hpp"
#include "replay/engine.hpp"
#include "replay/loss_adaptivity.hpp"
#include "replay/stream.hpp"

namespace replay {

// Everything one experiment run needs, parseable from a flat key=value file.
struct ExperimentConfig {
  StreamConfig stream;
  BufferSelectionConfig buffer;
  AlgorithmSpec spec;
  DedupSchedule dedup = DedupSchedule::PerDataset;
  LossAdaptConfig loss_adapt;
  std::size_t trace_rate = 50;  // 0 disables distribution records
  bool measure_time = true;
  bool allow_fallback = true;
};

// Parses flat key=value text. Blank lines and full-line # comments are
// skipped; whitespace around keys and values is trimmed. Unknown keys,
// duplicate keys, malformed values, and keys irrelevant to the configured
// algorithm (e.g. swil_w for Uniform) all raise ConfigError. `origin` is
// used in error messages (a file path or a test label).
ExperimentConfig parse_config_text(std::string_view text,
                                   std::string_view origin);

// Reads the file and delegates to parse_config_text; unreadable file raises
// ConfigError.
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace replay
