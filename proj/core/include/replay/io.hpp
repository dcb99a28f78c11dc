#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "replay/buffer.hpp"
#include "replay/trace.hpp"

namespace replay {

// Buffer interchange is JSON Lines: a header object {"embedding_dim": E}
// followed by one sample object per line,
//   {"id": 7, "loss": 0.031, "classes": {"3": [[...], ...], "12": [[...]]}}
// with class keys as decimal strings and each class mapping to a list of
// embeddings. Floats round-trip bit-exactly (shortest representation that
// parses back to the same double). Format violations throw DataFormatError.

void save_samples_jsonl(std::span<const BufferSample> samples,
                        std::size_t embedding_dim, const std::string& path);
void save_buffer_jsonl(const ReplayBuffer& buffer, const std::string& path);

// Loads the raw samples; embedding_dim_out, when non-null, receives the
// header dimensionality (every embedding is checked against it).
std::vector<BufferSample> load_samples_jsonl(
    const std::string& path, std::size_t* embedding_dim_out = nullptr);
ReplayBuffer load_buffer_jsonl(const std::string& path);

// Precomputed left-term file: flat binary, a little-endian uint64 count
// followed by count float64 values ordered by ascending sample id of the
// source buffer. The file is keyed to that buffer by its content hash,
// written as 16 lowercase hex characters to the sidecar "<path>.key";
// loading verifies the sidecar against the expected hash and throws
// DataFormatError on a mismatch or a malformed payload.
void save_left_terms(const std::string& path, std::span<const double> values,
                     std::uint64_t buffer_hash);
std::vector<double> load_left_terms(const std::string& path,
                                    std::uint64_t expected_buffer_hash);

// Trace files are JSON Lines with a "kind" discriminator per record:
// "distribution", "distance_rank", or "dataset_summary".
struct TraceData {
  std::vector<DistributionRecord> distributions;
  std::vector<RankEvent> ranks;
  std::vector<DatasetReport> datasets;
};
TraceData load_trace_jsonl(const std::string& path);

}  // namespace replay
