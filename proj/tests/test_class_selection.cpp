#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "replay/class_selection.hpp"
#include "replay/rng.hpp"
#include "test_support.hpp"

using namespace replay;
using testsupport::axis;
using testsupport::batch_of;
using testsupport::image;
using testsupport::sample;

namespace {

// Buffer whose class prototypes are exactly the axis unit vectors: one
// sample per class, embedding e_c. Every class is equidistant from the
// all-ones diagonal direction.
ReplayBuffer axis_buffer(std::size_t num_classes) {
  std::vector<BufferSample> samples;
  for (ClassId c = 0; c < num_classes; ++c) {
    samples.push_back(sample(c, 0.1, c, {axis(num_classes, c)}));
  }
  return ReplayBuffer::build(std::move(samples));
}

Embedding diagonal(std::size_t dim) {
  Embedding e(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  return e;
}

}  // namespace

TEST_CASE("balanced cursor walks consecutive classes") {
  // After class 10 the next four picks are classes 11 through 14, then 15
  // through 18, with the cursor resting one past the last pick each time.
  BalancedCursor cursor{11};
  auto [first, c1] = balanced_next(cursor, 4, 20);
  CHECK(first == std::vector<std::size_t>{11, 12, 13, 14});
  CHECK(c1.next == 15);

  auto [second, c2] = balanced_next(c1, 4, 20);
  CHECK(second == std::vector<std::size_t>{15, 16, 17, 18});
  CHECK(c2.next == 19);
}

TEST_CASE("balanced cursor wraps around the class count") {
  auto [classes, cursor] = balanced_next(BalancedCursor{4}, 2, 5);
  CHECK(classes == std::vector<std::size_t>{4, 0});
  CHECK(cursor.next == 1);
}

TEST_CASE("a full balanced cycle touches every class exactly once") {
  for (std::size_t start : {std::size_t{0}, std::size_t{3}, std::size_t{6}}) {
    auto [classes, cursor] = balanced_next(BalancedCursor{start}, 7, 7);
    std::vector<int> seen(7, 0);
    for (std::size_t c : classes) {
      REQUIRE(c < 7);
      ++seen[c];
    }
    for (int count : seen) CHECK(count == 1);
    CHECK(cursor.next == start % 7);
  }
}

TEST_CASE("balanced cursor requires at least one class") {
  CHECK_THROWS_AS(balanced_next(BalancedCursor{0}, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("similarity weighting over a single class is a point mass") {
  const auto buf = ReplayBuffer::build({sample(0, 0.1, 5, {{0.6, 0.8}})});
  const auto p =
      swil_distribution(std::vector<Embedding>{{1.0, 0.0}}, buf, SwilConfig{});
  REQUIRE(p.size() == 1);
  CHECK(p[0] == 1.0);
}

TEST_CASE("equidistant prototypes split the mass evenly") {
  std::map<ClassId, Embedding> protos{{0, {1.0, 0.0}}, {1, {0.0, 1.0}}};
  const std::vector<Embedding> embs{Embedding{1.0, 1.0}};
  const auto p = swil_distribution(embs, protos, SwilConfig{1.0});
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero distance is clamped before inversion") {
  // Image right on prototype 0: clamped distance 1e-12 against distance 1.0
  // gives a probability ratio of 1e12 to 1.
  std::map<ClassId, Embedding> protos{{0, {1.0, 0.0}}, {1, {0.0, 1.0}}};
  const std::vector<Embedding> embs{Embedding{1.0, 0.0}};
  const auto p = swil_distribution(embs, protos, SwilConfig{1.0});
  REQUIRE(p.size() == 2);
  CHECK(p[0] > 1.0 - 1e-11);
  CHECK(p[1] == doctest::Approx(1e-12).epsilon(1e-6));
  CHECK(p[0] / p[1] == doctest::Approx(1e12).epsilon(1e-6));
}

TEST_CASE("class distance takes the minimum over image embeddings") {
  std::map<ClassId, Embedding> protos{{0, {1.0, 0.0}}, {1, {0.0, 1.0}}};
  // One embedding near class 0, one near class 1; each class's distance
  // must come from its own nearest embedding.
  const std::vector<Embedding> embs{Embedding{1.0, 0.0}, Embedding{0.0, 1.0}};
  const auto d = swil_class_distances(embs, protos);
  REQUIRE(d.size() == 2);
  // Each class's nearest embedding is an exact match, so only the clamp
  // floor remains.
  CHECK(d[0] == 1e-12);
  CHECK(d[1] == 1e-12);

  const std::vector<Embedding> single{Embedding{1.0, 0.0}};
  const auto d2 = swil_class_distances(single, protos);
  CHECK(d2[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity weighting is scale invariant") {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<ClassId, Embedding> protos;
    for (ClassId c = 0; c < 3; ++c) {
      Embedding e(4);
      for (auto& x : e) x = rng.next_gaussian();
      protos[c] = e;
    }
    std::vector<Embedding> embs(2, Embedding(4));
    for (auto& e : embs) {
      for (auto& x : e) x = rng.next_gaussian();
    }
    const auto base = swil_distribution(embs, protos, SwilConfig{1.0});

    std::map<ClassId, Embedding> protos_scaled;
    for (auto& [c, e] : protos) {
      Embedding s = e;
      const double lambda = 0.01 + 10.0 * rng.next_double();
      for (auto& x : s) x *= lambda;
      protos_scaled[c] = s;
    }
    std::vector<Embedding> embs_scaled = embs;
    for (auto& e : embs_scaled) {
      const double lambda = 0.01 + 10.0 * rng.next_double();
      for (auto& x : e) x *= lambda;
    }
    const auto scaled =
        swil_distribution(embs_scaled, protos_scaled, SwilConfig{1.0});
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("exponent zero reduces similarity weighting to uniform") {
  std::map<ClassId, Embedding> protos{
      {0, {1.0, 0.0}}, {1, {0.0, 1.0}}, {2, {-1.0, 0.5}}};
  const std::vector<Embedding> embs{Embedding{0.3, 0.9}};
  const auto p = swil_distribution(embs, protos, SwilConfig{0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(p[i] - 1.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("larger exponent never raises the entropy") {
  std::map<ClassId, Embedding> protos{
      {0, {1.0, 0.0}}, {1, {0.6, 0.8}}, {2, {0.0, 1.0}}, {3, {-0.6, 0.8}}};
  const std::vector<Embedding> embs{Embedding{0.9, 0.1}};
  double prev = 2.0;
  for (const double w : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const auto p = swil_distribution(embs, protos, SwilConfig{w});
    const double h = normalized_entropy(p);
    CHECK(h <= prev + 1e-12);
    prev = h;
  }
}

TEST_CASE("buffer fast path agrees with the prototype-map reference") {
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BufferSample> samples;
    SampleId id = 0;
    for (ClassId c = 0; c < 4; ++c) {
      for (int m = 0; m < 3; ++m) {
        Embedding e(5);
        for (auto& x : e) x = rng.next_gaussian() + 0.3;
        samples.push_back(sample(id++, 0.1, c, {e}));
      }
    }
    const auto buf = ReplayBuffer::build(samples);
    const auto protos = compute_prototypes(samples);

    std::vector<Embedding> embs(2, Embedding(5));
    for (auto& e : embs) {
      for (auto& x : e) x = rng.next_gaussian();
    }
    const auto fast = swil_distribution(embs, buf, SwilConfig{1.3});
    const auto ref = swil_distribution(embs, protos, SwilConfig{1.3});
    REQUIRE(fast.size() == ref.size());
    for (std::size_t i = 0; i < fast.size(); ++i) {
      CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("class sampling is uniform when prototypes are equidistant") {
  const std::size_t C = 4;
  const auto buf = axis_buffer(C);
  BatchContext batch;
  const int n = 100000;
  batch.images.reserve(n);
  for (int i = 0; i < n; ++i) {
    batch.images.push_back(image({diagonal(C)}));
  }
  Rng rng(71);
  const auto classes = swil_select(batch, buf, SwilConfig{1.0}, rng);
  REQUIRE(classes.size() == static_cast<std::size_t>(n));
  std::vector<int> hits(C, 0);
  for (const ClassId c : classes) {
    REQUIRE(c < C);
    ++hits[c];
  }
  for (std::size_t c = 0; c < C; ++c) {
    CHECK(std::abs(static_cast<double>(hits[c]) / n - 0.25) < 0.01);
  }
}

TEST_CASE("class sampling on a single-class buffer always picks it") {
  const auto buf = ReplayBuffer::build({sample(0, 0.1, 9, {{0.6, 0.8}})});
  BatchContext batch = batch_of({image({{1.0, 0.0}}), image({{0.0, 1.0}})});
  Rng rng(73);
  const auto classes = swil_select(batch, buf, SwilConfig{1.0}, rng);
  CHECK(classes == std::vector<ClassId>{9, 9});
}

TEST_CASE("near-point-mass distributions select deterministically") {
  // Image on class 1's prototype: clamping makes class 1 carry virtually
  // all mass, so every draw lands there.
  const auto buf = axis_buffer(3);
  BatchContext batch;
  for (int i = 0; i < 200; ++i) {
    batch.images.push_back(image({axis(3, 1)}));
  }
  Rng rng(79);
  const auto classes = swil_select(batch, buf, SwilConfig{1.0}, rng);
  for (const ClassId c : classes) {
    CHECK(c == 1);
  }
}
