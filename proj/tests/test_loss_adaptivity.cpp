#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "replay/loss_adaptivity.hpp"
#include "replay/rng.hpp"
#include "test_support.hpp"

using namespace replay;
using testsupport::axis;
using testsupport::batch_of;
using testsupport::image;

namespace {

BatchContext batch_with_losses(const std::vector<double>& losses) {
  std::vector<BatchImage> images;
  for (const double l : losses) {
    images.push_back(image({axis(2, 0)}, l));
  }
  return batch_of(std::move(images));
}

}  // namespace

TEST_CASE("the budget counts images with loss strictly above the threshold") {
  const auto batch = batch_with_losses({0.1, 0.2, 0.3, 0.4});
  const auto budget = replay_budget(batch, LossAdaptConfig{true, 0.25});
  CHECK(budget.replay_count == 2);
  CHECK(budget.weight == 0.5);  // 2 of 4, exactly representable

  // Equality does not drive replay.
  const auto at_edge = replay_budget(batch, LossAdaptConfig{true, 0.4});
  CHECK(at_edge.replay_count == 0);
  CHECK(at_edge.weight == 0.0);
}

TEST_CASE("an all-easy batch earns an empty budget") {
  const auto batch = batch_with_losses({0.01, 0.02});
  const auto budget = replay_budget(batch, LossAdaptConfig{true, 0.5});
  CHECK(budget.replay_count == 0);
  CHECK(budget.weight == 0.0);
}

TEST_CASE("disabled adaptivity replays one sample per image at full weight") {
  const auto batch = batch_with_losses({0.9, 0.0, 0.4});
  const auto budget = replay_budget(batch, LossAdaptConfig{});
  CHECK(budget.replay_count == 3);
  CHECK(budget.weight == 1.0);
}

TEST_CASE("the budget is monotone in the threshold") {
  Rng rng(31);
  std::vector<double> losses;
  for (int i = 0; i < 40; ++i) losses.push_back(rng.next_double());
  const auto batch = batch_with_losses(losses);

  std::size_t prev = batch.images.size() + 1;
  for (const double t : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto budget = replay_budget(batch, LossAdaptConfig{true, t});
    CHECK(budget.replay_count <= prev);
    // weight * |B| recovers the count exactly.
    CHECK(budget.weight * static_cast<double>(batch.images.size()) ==
          static_cast<double>(budget.replay_count));
    prev = budget.replay_count;
  }
}

TEST_CASE("budget input validation") {
  const BatchContext empty;
  CHECK_THROWS_AS(replay_budget(empty, LossAdaptConfig{}),
                  std::invalid_argument);
  const auto batch = batch_with_losses({0.1});
  CHECK_THROWS_AS(replay_budget(batch, LossAdaptConfig{true, -0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      replay_budget(batch,
                    LossAdaptConfig{
                        true, std::numeric_limits<double>::infinity()}),
      std::invalid_argument);
}

TEST_CASE("the combined loss weights the replay term") {
  CHECK(combined_loss(0.6, 0.4, 0.5) == 0.8);
  CHECK(combined_loss(1.5, 9.0, 0.0) == 1.5);   // weight 0 drops replay
  CHECK(combined_loss(1.5, 2.25, 1.0) == 3.75);  // weight 1 is a plain sum

  CHECK_THROWS_AS(combined_loss(0.1, 0.2, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(
      combined_loss(std::numeric_limits<double>::quiet_NaN(), 0.2, 1.0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      combined_loss(0.1, std::numeric_limits<double>::infinity(), 1.0),
      std::invalid_argument);
}
