// Copyright 2026 The panfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "panfuse/errors.hpp"
#include "panfuse/mask.hpp"

using namespace panfuse;

namespace {

BinaryMask random_mask(std::mt19937_64& rng, Index h, Index w, double p) {
  std::bernoulli_distribution bit(p);
  BinaryMask m(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) m.set(r, c, bit(rng));
  }
  return m;
}

}  // namespace

TEST_CASE("iou of simple masks") {
  BinaryMask a(4, 4), b(4, 4);
  a.set(0, 0);
  a.set(0, 1);
  b.set(0, 1);
  b.set(0, 2);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(BinaryMask(4, 4), BinaryMask(4, 4)) == 0.0);
  CHECK(iou(a, BinaryMask(4, 4)) == 0.0);
  CHECK_THROWS_AS(iou(a, BinaryMask(3, 4)), InvalidInputError);
}

TEST_CASE("iou properties on random masks") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const BinaryMask a = random_mask(rng, 9, 7, 0.4);
    const BinaryMask b = random_mask(rng, 9, 7, 0.4);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (!a.empty()) CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("connected components") {
  CHECK(connected_components(BinaryMask(5, 5)).empty());

  BinaryMask two(3, 3);
  two.set(0, 0);
  two.set(2, 2);
  auto parts = connected_components(two);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].area() == 1);
  CHECK(parts[1].area() == 1);

  BinaryMask diag(2, 2);
  diag.set(0, 0);
  diag.set(1, 1);
  CHECK(connected_components(diag, Connectivity::kFour).size() == 2);
  CHECK(connected_components(diag, Connectivity::kEight).size() == 1);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const BinaryMask m = random_mask(rng, 12, 10, 0.5);
    for (Connectivity conn : {Connectivity::kFour, Connectivity::kEight}) {
      Index total = 0;
      BoolGrid seen = BoolGrid::Constant(12, 10, false);
      for (const BinaryMask& part : connected_components(m, conn)) {
        CHECK_FALSE(part.empty());
        CHECK_FALSE((seen && part.bits()).any());
        seen = seen || part.bits();
        total += part.area();
      }
      CHECK(total == m.area());
      CHECK((seen == m.bits()).all());
    }
  }
}

TEST_CASE("label_components areas and raster order") {
  BinaryMask m(3, 4);
  m.set(0, 3);
  m.set(1, 3);
  m.set(2, 0);
  const ComponentLabels labels = label_components(m, Connectivity::kFour);
  CHECK(labels.count == 2);
  CHECK(labels.index(0, 3) == 0);
  CHECK(labels.index(2, 0) == 1);
  CHECK(labels.areas == std::vector<Index>{2, 1});
  CHECK(labels.index(0, 0) == -1);
}

TEST_CASE("mask_from_label") {
  LabelMap map(3, 3, 7);
  CHECK(mask_from_label(map, 7).area() == 9);
  CHECK(mask_from_label(map, 2).empty());

  map(1, 1) = 4;
  map(2, 1) = 4;
  const BinaryMask m = mask_from_label(map, 4);
  LabelMap painted(3, 3);
  painted.paint(m, 4);
  CHECK((mask_from_label(painted, 4) == m));
  CHECK(painted(1, 1) == 4);
  CHECK(painted(0, 0) == kVoidId);
}

TEST_CASE("partition validator") {
  PanopticImage img{LabelMap(2, 3), {}};
  CHECK(is_valid_partition(img));

  img.labels(0, 0) = 5;
  CHECK_FALSE(is_valid_partition(img));
  CHECK_THROWS_AS(validate_partition(img), ConsistencyError);

  img.segments.push_back({5, 1, true, 1});
  CHECK(is_valid_partition(img));

  img.segments[0].area = 2;
  CHECK_FALSE(is_valid_partition(img));
  img.segments[0].area = 1;

  img.segments.push_back({5, 1, true, 1});
  CHECK_FALSE(is_valid_partition(img));
  img.segments.pop_back();

  img.segments.push_back({6, 1, true, 1});
  CHECK_FALSE(is_valid_partition(img));
}

TEST_CASE("random partitions satisfy the validator") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const PanopticImage img = oracle::random_partition(rng, 10, 12, 5, 4);
    CHECK(is_valid_partition(img));
    Index total = (img.labels.ids() == kVoidId).count();
    for (const SegmentInfo& s : img.segments) total += s.area;
    CHECK(total == 120);
  }
}

TEST_CASE("id_histogram") {
  LabelMap map(2, 2, 3);
  map(0, 0) = 0;
  map(1, 1) = 9;
  const auto hist = id_histogram(map);
  REQUIRE(hist.size() == 3);
  CHECK(hist[0] == std::pair<SegmentId, Index>{0, 1});
  CHECK(hist[1] == std::pair<SegmentId, Index>{3, 2});
  CHECK(hist[2] == std::pair<SegmentId, Index>{9, 1});
}
