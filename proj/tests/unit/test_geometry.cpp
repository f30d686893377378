#include <doctest.h>

#include <algorithm>
#include <random>

#include "../support/test_support.hpp"
#include "zoomin/geometry.hpp"

using namespace zoomin::geometry;

TEST_SUITE("geometry") {

TEST_CASE("iou fixtures") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  // 5x5 intersection over 100+100-25 union
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == 25.0 / 175.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) ==
        test_support::iou_rasterized({0, 0, 10, 10}, {5, 5, 15, 15}));
}

TEST_CASE("iou properties against the rasterization oracle") {
  std::mt19937_64 rng(20240701);
  for (int i = 0; i < 1000; ++i) {
    BBox a = test_support::random_box(rng, 48);
    BBox b = test_support::random_box(rng, 48);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(std::abs(ab - test_support::iou_rasterized(a, b)) <= 1e-9);
    if (a == b) CHECK(ab == 1.0);
    if (ab == 1.0) CHECK(a == b);
  }
}

TEST_CASE("iou_reward fixtures and empty-list rules") {
  std::vector<BBox> pred{{0, 0, 10, 10}, {20, 20, 30, 30}};
  std::vector<BBox> ref{{0, 0, 10, 10}};
  CHECK(iou_reward(pred, ref) == 0.5);

  CHECK(iou_reward({}, {}) == 1.0);
  CHECK(iou_reward(pred, {}) == 0.0);
  CHECK(iou_reward({}, ref) == 0.0);
}

TEST_CASE("iou_reward permutation invariance is exact") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BBox> pred, ref;
    for (int i = 0; i < 5; ++i) pred.push_back(test_support::random_box(rng, 40));
    for (int i = 0; i < 4; ++i) ref.push_back(test_support::random_box(rng, 40));
    const double base = iou_reward(pred, ref);
    std::shuffle(pred.begin(), pred.end(), rng);
    std::shuffle(ref.begin(), ref.end(), rng);
    CHECK(iou_reward(pred, ref) == base);
  }
}

TEST_CASE("adding a predicted box equal to a reference never lowers the reward") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BBox> pred, ref;
    for (int i = 0; i < 3; ++i) pred.push_back(test_support::random_box(rng, 40));
    for (int i = 0; i < 3; ++i) ref.push_back(test_support::random_box(rng, 40));
    const double before = iou_reward(pred, ref);
    pred.push_back(ref[0]);
    CHECK(iou_reward(pred, ref) >= before - 1e-12);
  }
}

TEST_CASE("clamp_box") {
  ImageDims dims{100, 100};
  CHECK(clamp_box({-5, -5, 10, 10}, dims) == BBox{0, 0, 10, 10});
  CHECK(clamp_box({90, 90, 200, 200}, dims) == BBox{90, 90, 100, 100});
  CHECK(clamp_box({150, 150, 200, 200}, dims) == std::nullopt);
  // swapped corners are normalized before clipping
  CHECK(clamp_box({10, 10, 0, 0}, dims) == BBox{0, 0, 10, 10});
}

TEST_CASE("area_fraction") {
  ImageDims dims{100, 100};
  CHECK(area_fraction({0, 0, 80, 80}, dims) == 0.64);
  CHECK(area_fraction({0, 0, 100, 100}, dims) == 1.0);
  CHECK(area_fraction({0, 0, 40, 40}, dims) == 0.16);
}

TEST_CASE("purify") {
  ImageDims dims{100, 100};
  std::vector<BBox> boxes{{0, 0, 80, 80}, {0, 0, 40, 40}};
  auto kept = purify(boxes, dims);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == BBox{0, 0, 40, 40});

  CHECK(purify({}, dims).empty());

  // exactly 50% stays: the rule is strictly-greater
  std::vector<BBox> half{{0, 0, 50, 100}};
  CHECK(purify(half, dims) == half);
}

TEST_CASE("purify is idempotent") {
  std::mt19937_64 rng(23);
  ImageDims dims{64, 64};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BBox> boxes;
    for (int i = 0; i < 6; ++i) boxes.push_back(test_support::random_box(rng, 64));
    auto once = purify(boxes, dims);
    CHECK(purify(once, dims) == once);
  }
}

}  // TEST_SUITE
