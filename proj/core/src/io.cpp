#include "replay/io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "replay/errors.hpp"

namespace replay {

namespace {

using json = nlohmann::ordered_json;

json parse_line(const std::string& line, const std::string& path,
                std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataFormatError(path + ":" + std::to_string(lineno) +
                          ": not a JSON object");
  }
  return j;
}

[[noreturn]] void bad(const std::string& path, std::size_t lineno,
                      const std::string& what) {
  throw DataFormatError(path + ":" + std::to_string(lineno) + ": " + what);
}

json embedding_to_json(const Embedding& e) {
  json arr = json::array();
  for (double x : e) arr.push_back(x);
  return arr;
}

Embedding embedding_from_json(const json& arr, const std::string& path,
                              std::size_t lineno) {
  if (!arr.is_array() || arr.empty()) {
    bad(path, lineno, "embedding must be a non-empty array");
  }
  Embedding e;
  e.reserve(arr.size());
  for (const json& x : arr) {
    if (!x.is_number()) bad(path, lineno, "embedding component not a number");
    e.push_back(x.get<double>());
  }
  return e;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw DataFormatError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw DataFormatError(path + ": cannot open for reading");
  return in;
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  char bytes[8];
  if (!in.read(bytes, 8)) throw DataFormatError(path + ": truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i]))
         << (8 * i);
  }
  return v;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

}  // namespace

void save_samples_jsonl(std::span<const BufferSample> samples,
                        std::size_t embedding_dim, const std::string& path) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  json header;
  header["embedding_dim"] = embedding_dim;
  out << header.dump() << '\n';
  for (const BufferSample& s : samples) {
    json rec;
    rec["id"] = s.id;
    rec["loss"] = s.loss;
    json classes = json::object();
    for (const auto& [cls, embs] : s.class_embeddings) {
      json lists = json::array();
      for (const Embedding& e : embs) lists.push_back(embedding_to_json(e));
      classes[std::to_string(cls)] = std::move(lists);
    }
    rec["classes"] = std::move(classes);
    out << rec.dump() << '\n';
  }
  if (!out) throw DataFormatError(path + ": write failed");
}

void save_buffer_jsonl(const ReplayBuffer& buffer, const std::string& path) {
  save_samples_jsonl(buffer.samples(), buffer.embedding_dim(), path);
}

std::vector<BufferSample> load_samples_jsonl(const std::string& path,
                                             std::size_t* embedding_dim_out) {
  auto in = open_in(path, std::ios::in);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) {
    throw DataFormatError(path + ": empty file (missing header)");
  }
  ++lineno;
  json header = parse_line(line, path, lineno);
  if (!header.contains("embedding_dim") ||
      !header["embedding_dim"].is_number_unsigned() ||
      header["embedding_dim"].get<std::uint64_t>() == 0) {
    bad(path, lineno, "header must carry a positive embedding_dim");
  }
  const std::size_t dim = header["embedding_dim"].get<std::size_t>();
  if (embedding_dim_out) *embedding_dim_out = dim;

  std::vector<BufferSample> samples;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = parse_line(line, path, lineno);
    if (!rec.contains("id") || !rec["id"].is_number_unsigned()) {
      bad(path, lineno, "sample needs an unsigned integer id");
    }
    if (!rec.contains("loss") || !rec["loss"].is_number()) {
      bad(path, lineno, "sample needs a numeric loss");
    }
    if (!rec.contains("classes") || !rec["classes"].is_object() ||
        rec["classes"].empty()) {
      bad(path, lineno, "sample needs a non-empty classes object");
    }
    BufferSample s;
    s.id = rec["id"].get<SampleId>();
    s.loss = rec["loss"].get<double>();
    for (const auto& [key, lists] : rec["classes"].items()) {
      ClassId cls = 0;
      const auto [ptr, ec] =
          std::from_chars(key.data(), key.data() + key.size(), cls);
      if (ec != std::errc() || ptr != key.data() + key.size()) {
        bad(path, lineno, "class key is not a decimal class id: " + key);
      }
      if (!lists.is_array() || lists.empty()) {
        bad(path, lineno, "class must map to a non-empty embedding list");
      }
      std::vector<Embedding> embs;
      embs.reserve(lists.size());
      for (const json& arr : lists) {
        Embedding e = embedding_from_json(arr, path, lineno);
        if (e.size() != dim) {
          bad(path, lineno, "embedding width disagrees with header");
        }
        embs.push_back(std::move(e));
      }
      s.class_embeddings.emplace(cls, std::move(embs));
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw DataFormatError(path + ": no samples after header");
  }
  return samples;
}

ReplayBuffer load_buffer_jsonl(const std::string& path) {
  std::vector<BufferSample> samples = load_samples_jsonl(path);
  try {
    return ReplayBuffer::build(std::move(samples));
  } catch (const std::invalid_argument& e) {
    throw DataFormatError(path + ": " + e.what());
  }
}

void save_left_terms(const std::string& path, std::span<const double> values,
                     std::uint64_t buffer_hash) {
  auto out = open_out(path, std::ios::out | std::ios::binary | std::ios::trunc);
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw DataFormatError(path + ": write failed");
  auto key = open_out(path + ".key", std::ios::out | std::ios::trunc);
  key << hash_hex(buffer_hash) << '\n';
  if (!key) throw DataFormatError(path + ".key: write failed");
}

std::vector<double> load_left_terms(const std::string& path,
                                    std::uint64_t expected_buffer_hash) {
  {
    auto key = open_in(path + ".key", std::ios::in);
    std::string stored;
    key >> stored;
    if (stored != hash_hex(expected_buffer_hash)) {
      throw DataFormatError(path +
                            ": precomputed terms were built from a different "
                            "buffer (content hash mismatch)");
    }
  }
  auto in = open_in(path, std::ios::in | std::ios::binary);
  const std::uint64_t count = get_u64(in, path);
  std::vector<double> values;
  values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values.push_back(std::bit_cast<double>(get_u64(in, path)));
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw DataFormatError(path + ": trailing bytes after payload");
  }
  return values;
}

TraceData load_trace_jsonl(const std::string& path) {
  auto in = open_in(path, std::ios::in);
  TraceData data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = parse_line(line, path, lineno);
    if (!rec.contains("kind") || !rec["kind"].is_string()) {
      bad(path, lineno, "trace record needs a string kind");
    }
    const std::string kind = rec["kind"].get<std::string>();
    try {
      if (kind == "distribution") {
        DistributionRecord r;
        r.source = rec.at("source").get<std::string>();
        r.at.dataset = rec.at("dataset").get<std::size_t>();
        r.at.epoch = rec.at("epoch").get<std::size_t>();
        r.at.batch = rec.at("batch").get<std::size_t>();
        r.image = rec.at("image").get<std::size_t>();
        r.probs = rec.at("probs").get<std::vector<double>>();
        r.entropy = rec.at("entropy").get<double>();
        data.distributions.push_back(std::move(r));
      } else if (kind == "distance_rank") {
        RankEvent r;
        r.at.dataset = rec.at("dataset").get<std::size_t>();
        r.at.epoch = rec.at("epoch").get<std::size_t>();
        r.at.batch = rec.at("batch").get<std::size_t>();
        r.image = rec.at("image").get<std::size_t>();
        r.rank = rec.at("rank").get<std::size_t>();
        r.num_candidates = rec.at("num_candidates").get<std::size_t>();
        data.ranks.push_back(r);
      } else if (kind == "dataset_summary") {
        DatasetReport r;
        r.index = rec.at("dataset").get<std::size_t>();
        r.images = rec.at("images").get<std::size_t>();
        r.replays = rec.at("replays").get<std::size_t>();
        r.duplicates = rec.at("duplicates").get<std::size_t>();
        r.coverage = rec.at("coverage").get<double>();
        r.replay_fraction = rec.at("replay_fraction").get<double>();
        r.class_replay_cv = rec.at("class_replay_cv").get<double>();
        data.datasets.push_back(r);
      } else {
        bad(path, lineno, "unknown trace record kind: " + kind);
      }
    } catch (const json::exception& e) {
      bad(path, lineno, std::string("malformed trace record: ") + e.what());
    }
  }
  return data;
}

}  // namespace replay
