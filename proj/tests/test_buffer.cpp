#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "replay/buffer.hpp"
#include "replay/errors.hpp"
#include "replay/rng.hpp"
#include "test_support.hpp"

using namespace replay;
using testsupport::axis;
using testsupport::batch_of;
using testsupport::image;
using testsupport::sample;

namespace {

// Pool of single-class samples with prescribed per-class losses.
std::vector<BufferSample> pool_with_losses(
    const std::vector<std::pair<ClassId, std::vector<double>>>& spec_by_class,
    std::size_t dim = 4) {
  std::vector<BufferSample> pool;
  SampleId next = 0;
  Rng rng(99);
  for (const auto& [cls, losses] : spec_by_class) {
    for (const double loss : losses) {
      Embedding e(dim);
      for (auto& x : e) x = rng.next_gaussian();
      pool.push_back(sample(next++, loss, cls, {e}));
    }
  }
  return pool;
}

}  // namespace

TEST_CASE("threshold keeps only losses strictly below it") {
  auto pool = pool_with_losses({{0, {0.1, 0.2}}});
  const auto buf = select_buffer(pool, {0.15, 50});
  REQUIRE(buf.size() == 1);
  CHECK(buf.samples()[0].loss == doctest::Approx(0.1));
  CHECK(buf.samples()[0].id == 0);
}

TEST_CASE("loss equal to the threshold is excluded") {
  auto pool = pool_with_losses({{0, {0.15, 0.1}}});
  const auto buf = select_buffer(pool, {0.15, 50});
  REQUIRE(buf.size() == 1);
  CHECK(buf.samples()[0].loss == doctest::Approx(0.1));
}

TEST_CASE("a pool where nothing passes the threshold is an exhaustion error") {
  // Mirrors a source whose samples are entirely excluded: with any positive
  // threshold below every loss, zero samples survive.
  auto pool = pool_with_losses({{0, {0.5, 0.9, 1.4}}});
  CHECK_THROWS_AS(select_buffer(pool, {1e-9, 50}), ExhaustionError);
}

TEST_CASE("selection config is validated") {
  auto pool = pool_with_losses({{0, {0.1}}});
  CHECK_THROWS_AS(select_buffer(pool, {0.0, 50}), ConfigError);
  CHECK_THROWS_AS(select_buffer(pool, {-1.0, 50}), ConfigError);
  CHECK_THROWS_AS(select_buffer(pool, {0.15, 0}), ConfigError);
}

TEST_CASE("class floor takes exactly the lowest-loss members") {
  // 120 under-threshold candidates in one class, floor 50: the survivors
  // must be precisely the 50 smallest losses.
  std::vector<double> losses;
  Rng rng(7);
  for (int i = 0; i < 120; ++i) losses.push_back(0.001 + 0.1 * rng.next_double());
  auto pool = pool_with_losses({{3, losses}});
  const auto buf = select_buffer(pool, {0.15, 50});
  REQUIRE(buf.size() == 50);

  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = sorted[49];
  for (const auto& s : buf.samples()) {
    CHECK(s.loss <= cutoff);
  }
}

TEST_CASE("per-class counts are min(floor, available) on a random pool") {
  Rng rng(13);
  std::vector<std::pair<ClassId, std::vector<double>>> classes;
  std::vector<std::size_t> expected;
  for (ClassId c = 0; c < 6; ++c) {
    const std::size_t count = 1 + rng.next_index(20);
    std::vector<double> losses;
    for (std::size_t i = 0; i < count; ++i) {
      losses.push_back(0.01 + 0.1 * rng.next_double());  // all pass t = 0.15
    }
    classes.push_back({c, losses});
    expected.push_back(std::min<std::size_t>(8, count));
  }
  auto pool = pool_with_losses(classes);
  const auto buf = select_buffer(pool, {0.15, 8});
  REQUIRE(buf.num_classes() == 6);
  for (ClassId c = 0; c < 6; ++c) {
    CHECK(buf.class_members(c).size() == expected[c]);
  }
}

TEST_CASE("selection is deterministic and ties break by lower id") {
  auto pool = pool_with_losses({{0, {0.1, 0.1, 0.1}}});
  const auto a = select_buffer(pool, {0.15, 2});
  const auto b = select_buffer(pool, {0.15, 2});
  REQUIRE(a.size() == 2);
  CHECK(a.samples()[0].id == 0);
  CHECK(a.samples()[1].id == 1);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples()[i].id == b.samples()[i].id);
  }
}

TEST_CASE("a sample kept for one class is kept whole") {
  // Sample 0 carries classes {0, 1}. Class 1 has capacity for it only via
  // the keep-whole rule: floor 1 and a strictly better class-1 candidate.
  BufferSample multi;
  multi.id = 0;
  multi.loss = 0.05;
  multi.class_embeddings[0] = {axis(4, 0)};
  multi.class_embeddings[1] = {axis(4, 1)};
  auto pool = pool_with_losses({{1, {0.01}}});  // id 0 reassigned below
  pool[0].id = 1;
  pool.push_back(multi);

  const auto buf = select_buffer(pool, {0.15, 1});
  // Class 0's floor admits the multi-class sample; its class-1 entry rides
  // along even though class 1's floor was already filled by sample 1.
  REQUIRE(buf.size() == 2);
  CHECK(class_membership(buf, 0) == std::vector<SampleId>{0});
  CHECK(class_membership(buf, 1) == std::vector<SampleId>{0, 1});
}

TEST_CASE("every selected sample satisfies the threshold across configs") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<ClassId, std::vector<double>>> classes;
    for (ClassId c = 0; c < 4; ++c) {
      std::vector<double> losses;
      const std::size_t count = 1 + rng.next_index(30);
      for (std::size_t i = 0; i < count; ++i) {
        losses.push_back(rng.next_double());
      }
      classes.push_back({c, losses});
    }
    auto pool = pool_with_losses(classes);
    const double t = 0.2 + 0.6 * rng.next_double();
    const std::size_t floor = 1 + rng.next_index(10);
    ReplayBuffer buf = [&] {
      try {
        return select_buffer(pool, {t, floor});
      } catch (const ExhaustionError&) {
        return select_buffer(pool, {1.5, floor});  // everything passes
      }
    }();
    for (const auto& s : buf.samples()) {
      CHECK(s.loss < 1.5);
    }
  }
}

TEST_CASE("prototype of a single embedding is that embedding") {
  std::vector<BufferSample> samples{sample(0, 0.1, 2, {{0.3, -0.4, 0.5}})};
  const auto protos = compute_prototypes(samples);
  REQUIRE(protos.size() == 1);
  CHECK(protos.at(2) == Embedding{0.3, -0.4, 0.5});
}

TEST_CASE("antipodal embeddings make a degenerate prototype") {
  std::vector<BufferSample> samples{
      sample(0, 0.1, 0, {{1.0, 0.0}, {-1.0, 0.0}})};
  CHECK_THROWS_AS(compute_prototypes(samples), std::invalid_argument);
  CHECK_THROWS_AS(ReplayBuffer::build(samples), std::invalid_argument);
}

TEST_CASE("prototype equals the component-wise mean of all class embeddings") {
  Rng rng(51);
  const std::size_t dim = 8;
  std::vector<BufferSample> samples;
  std::vector<double> mean(dim, 0.0);
  std::size_t total = 0;
  for (SampleId id = 0; id < 25; ++id) {
    // Two embeddings per sample: 50 unit vectors in the class overall.
    std::vector<Embedding> embs;
    for (int e = 0; e < 2; ++e) {
      Embedding v(dim);
      double n2 = 0.0;
      for (auto& x : v) {
        x = rng.next_gaussian() + 0.5;  // offset so the mean stays nonzero
        n2 += x * x;
      }
      const double n = std::sqrt(n2);
      for (auto& x : v) x /= n;
      for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
      embs.push_back(v);
      ++total;
    }
    samples.push_back(sample(id, 0.1, 4, embs));
  }
  for (auto& m : mean) m /= static_cast<double>(total);

  const auto protos = compute_prototypes(samples);
  const auto& p = protos.at(4);
  REQUIRE(p.size() == dim);
  for (std::size_t i = 0; i < dim; ++i) {
    CHECK(std::abs(p[i] - mean[i]) <= 1e-12 * std::max(1.0, std::abs(mean[i])));
  }

  // The buffer's own prototype agrees with the standalone computation.
  const auto buf = ReplayBuffer::build(samples);
  const auto& bp = buf.prototype(4);
  for (std::size_t i = 0; i < dim; ++i) {
    CHECK(bp[i] == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

TEST_CASE("class membership lists sorted unique ids") {
  BufferSample s1 = sample(1, 0.1, 0, {axis(3, 0)});
  BufferSample s2 = sample(2, 0.1, 0, {axis(3, 1)});
  s2.class_embeddings[1] = {axis(3, 2)};
  const auto buf = ReplayBuffer::build({s1, s2});

  CHECK(class_membership(buf, 1) == std::vector<SampleId>{2});
  CHECK(class_membership(buf, 0) == std::vector<SampleId>{1, 2});
  CHECK_THROWS_AS(class_membership(buf, 7), std::invalid_argument);
}

TEST_CASE("buffer construction validates samples") {
  CHECK_THROWS_AS(ReplayBuffer::build({}), std::invalid_argument);

  // Duplicate ids.
  CHECK_THROWS_AS(ReplayBuffer::build({sample(0, 0.1, 0, {axis(2, 0)}),
                                       sample(0, 0.1, 1, {axis(2, 1)})}),
                  std::invalid_argument);

  BufferSample no_class;
  no_class.id = 0;
  no_class.loss = 0.1;
  CHECK_THROWS_AS(ReplayBuffer::build({no_class}), std::invalid_argument);

  BufferSample neg_loss = sample(0, -0.1, 0, {axis(2, 0)});
  CHECK_THROWS_AS(ReplayBuffer::build({neg_loss}), std::invalid_argument);

  BufferSample empty_list;
  empty_list.id = 0;
  empty_list.loss = 0.1;
  empty_list.class_embeddings[0] = {};
  CHECK_THROWS_AS(ReplayBuffer::build({empty_list}), std::invalid_argument);

  BufferSample zero_vec = sample(0, 0.1, 0, {{0.0, 0.0}});
  CHECK_THROWS_AS(ReplayBuffer::build({zero_vec}), std::invalid_argument);

  // Mismatched embedding dimensions across samples.
  CHECK_THROWS_AS(ReplayBuffer::build({sample(0, 0.1, 0, {axis(2, 0)}),
                                       sample(1, 0.1, 0, {axis(3, 0)})}),
                  std::invalid_argument);
}

TEST_CASE("position_of inverts sample ordering") {
  const auto buf = ReplayBuffer::build({sample(5, 0.1, 0, {axis(2, 0)}),
                                        sample(2, 0.2, 0, {axis(2, 1)}),
                                        sample(9, 0.05, 1, {axis(2, 1)})});
  REQUIRE(buf.size() == 3);
  for (std::size_t pos = 0; pos < buf.size(); ++pos) {
    CHECK(buf.position_of(buf.sample_at(pos).id) == pos);
  }
  CHECK_THROWS_AS(buf.position_of(1234), std::invalid_argument);
}

TEST_CASE("member prototype distances are clamped and per-member") {
  // One member sits exactly on the prototype (single member defines it):
  // its distance must be the 1e-12 clamp, not zero.
  const auto buf = ReplayBuffer::build({sample(0, 0.1, 0, {axis(3, 0)})});
  const auto& d = buf.member_prototype_distances(0);
  REQUIRE(d.size() == 1);
  CHECK(d[0] == 1e-12);
}

TEST_CASE("content hash is sensitive to data and stable across rebuilds") {
  const auto make = [](double loss, double x) {
    return ReplayBuffer::build({sample(0, loss, 0, {{x, 0.5}}),
                                sample(1, 0.1, 1, {{0.2, 0.9}})});
  };
  const auto base = buffer_content_hash(make(0.1, 0.7));
  CHECK(buffer_content_hash(make(0.1, 0.7)) == base);
  CHECK(buffer_content_hash(make(0.11, 0.7)) != base);
  CHECK(buffer_content_hash(make(0.1, 0.7000001)) != base);
}

TEST_CASE("batch validation rejects malformed batches") {
  CHECK_THROWS_AS(validate_batch(batch_of({}), 3), std::invalid_argument);

  CHECK_THROWS_AS(validate_batch(batch_of({image({})}), 3),
                  std::invalid_argument);

  CHECK_THROWS_AS(validate_batch(batch_of({image({axis(2, 0)})}), 3),
                  std::invalid_argument);

  CHECK_THROWS_AS(validate_batch(batch_of({image({{0.0, 0.0, 0.0}})}), 3),
                  std::invalid_argument);

  CHECK_THROWS_AS(validate_batch(batch_of({image({axis(3, 0)}, -1.0)}), 3),
                  std::invalid_argument);

  CHECK_NOTHROW(validate_batch(batch_of({image({axis(3, 0)}, 0.2)}), 3));
}
