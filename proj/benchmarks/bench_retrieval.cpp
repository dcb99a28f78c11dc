// End-to-end retrieval cost: one plan per iteration against a fixed buffer,
// per algorithm and buffer size. The fast paths run at 10k and 50k samples;
// the adversarial paths run smaller because their cost is dominated by the
// candidate score tables.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <benchmark/benchmark.h>

#include "replay/batch.hpp"
#include "replay/buffer.hpp"
#include "replay/engine.hpp"
#include "replay/geometry.hpp"
#include "replay/rng.hpp"

namespace {

using namespace replay;

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

// Single-class samples clustered per class, losses far below the admission
// threshold so the buffer keeps exactly classes * floor of them.
std::vector<BufferSample> clustered_pool(std::size_t classes,
                                         std::size_t per_class,
                                         std::size_t dim,
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
      Embedding e(dim);
      for (auto& x : e) x = 0.25 * rng.next_gaussian();
      e[c % dim] += 2.0;
      s.class_embeddings[c] = {std::move(e)};
      pool.push_back(std::move(s));
      ++id;
    }
  }
  return pool;
}

BatchContext fixed_batch(std::size_t images, std::size_t top_k,
                         std::size_t dim) {
  Rng rng(9);
  BatchContext batch;
  for (std::size_t i = 0; i < images; ++i) {
    BatchImage img;
    img.loss = 0.5;
    for (std::size_t t = 0; t < top_k; ++t)
      img.top_k_embeddings.push_back(random_unit(rng, dim));
    batch.images.push_back(std::move(img));
  }
  return batch;
}

void bm_retrieve(benchmark::State& state, Algorithm algorithm) {
  constexpr std::size_t kClasses = 10;
  constexpr std::size_t kDim = 8;
  const auto buffer_size = static_cast<std::size_t>(state.range(0));
  BufferSelectionConfig cfg;
  cfg.loss_threshold = 0.5;
  cfg.class_floor = buffer_size / kClasses;
  const ReplayBuffer buffer = select_buffer(
      clustered_pool(kClasses, buffer_size / kClasses, kDim, 7), cfg);

  AlgorithmSpec spec;
  spec.algorithm = algorithm;
  RetrievalEngine engine(spec, DedupSchedule::None, EngineOptions{true, 0});
  Rng rng(123);
  const BatchContext batch = fixed_batch(8, 4, kDim);

  std::size_t b = 0;
  for (auto _ : state) {
    const RetrievalPlan plan =
        engine.retrieve(batch, buffer, rng, BatchCoords{0, 0, b++});
    benchmark::DoNotOptimize(plan.sample_ids.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(batch.images.size()));
}

BENCHMARK_CAPTURE(bm_retrieve, uniform, Algorithm::Uniform)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, uniform_balanced, Algorithm::UniformBalanced)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, grasp, Algorithm::Grasp)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, swil, Algorithm::Swil)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, sw_grasp, Algorithm::SwGrasp)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, adaptive_sw_grasp, Algorithm::AdaptiveSwGrasp)
    ->Arg(10000)
    ->Arg(50000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_retrieve, aser, Algorithm::Aser)
    ->Arg(1000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_retrieve, aser_pc, Algorithm::AserPc)
    ->Arg(1000)
    ->Arg(5000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_retrieve, sw_aser_pc, Algorithm::SwAserPc)
    ->Arg(1000)
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
