// Cost of the Shapley-value primitives: the single-evaluation recursion, the
// item-reduced score table, and the buffer-wide left-term cache.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <benchmark/benchmark.h>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"
#include "replay/geometry.hpp"
#include "replay/rng.hpp"
#include "replay/sample_selection.hpp"

namespace {

using namespace replay;

constexpr std::size_t kDim = 16;
constexpr std::size_t kNearest = 20;

Embedding random_unit(Rng& rng, std::size_t dim) {
  Embedding e(dim);
  double n = 0.0;
  do {
    for (auto& x : e) x = rng.next_gaussian();
    n = norm(e);
  } while (n < 1e-6);
  for (auto& x : e) x /= n;
  return e;
}

std::vector<BufferSample> clustered_pool(std::size_t classes,
                                         std::size_t per_class,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BufferSample> pool;
  pool.reserve(classes * per_class);
  SampleId id = 0;
  for (ClassId c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < per_class; ++j) {
      BufferSample s;
      s.id = id;
      s.loss = 0.01 + 1e-6 * static_cast<double>(id);
      Embedding e(kDim);
      for (auto& x : e) x = 0.25 * rng.next_gaussian();
      e[c % kDim] += 2.0;
      s.class_embeddings[c] = {std::move(e)};
      pool.push_back(std::move(s));
      ++id;
    }
  }
  return pool;
}

BatchContext fixed_batch(std::size_t images, std::size_t top_k) {
  Rng rng(9);
  BatchContext batch;
  for (std::size_t i = 0; i < images; ++i) {
    BatchImage img;
    img.loss = 0.5;
    for (std::size_t t = 0; t < top_k; ++t)
      img.top_k_embeddings.push_back(random_unit(rng, kDim));
    batch.images.push_back(std::move(img));
  }
  return batch;
}

void bm_knn_sv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<LabeledEmbedding> cands(n);
  for (auto& c : cands) {
    c.feature = random_unit(rng, kDim);
    c.label = random_unit(rng, kDim);
  }
  const LabeledEmbedding eval_point{random_unit(rng, kDim),
                                    random_unit(rng, kDim)};
  for (auto _ : state) {
    const std::vector<double> sv = knn_sv(cands, eval_point, kNearest);
    benchmark::DoNotOptimize(sv.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(bm_knn_sv)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

void bm_sv_table(benchmark::State& state) {
  const auto items = static_cast<std::size_t>(state.range(0));
  const ReplayBuffer buffer =
      ReplayBuffer::build(clustered_pool(8, (items + 7) / 8, 11));
  std::vector<std::size_t> positions(items);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  const InstanceSet candidates = buffer_instances(buffer, positions);
  const InstanceSet evals = batch_instances(fixed_batch(8, 4));
  for (auto _ : state) {
    const KnnSvTable table =
        knn_sv_table(candidates, evals, kNearest, KReduction::Min);
    benchmark::DoNotOptimize(table.values.data());
  }
}
BENCHMARK(bm_sv_table)->Arg(168)->Arg(352)->Unit(benchmark::kMillisecond);

void bm_left_term(benchmark::State& state) {
  const auto samples = static_cast<std::size_t>(state.range(0));
  const ReplayBuffer buffer =
      ReplayBuffer::build(clustered_pool(8, (samples + 7) / 8, 13));
  for (auto _ : state) {
    const std::vector<double> left = precompute_left_term(buffer, kNearest);
    benchmark::DoNotOptimize(left.data());
  }
}
BENCHMARK(bm_left_term)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
