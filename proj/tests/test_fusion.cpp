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
#include <set>

#include "panfuse/errors.hpp"
#include "panfuse/fusion.hpp"

using namespace panfuse;

namespace {

constexpr CategoryId kPerson = 1;
constexpr CategoryId kTie = 32;
constexpr CategoryId kWall = 100;

BinaryMask rect(Index h, Index w, Index r0, Index c0, Index rh, Index cw) {
  BinaryMask m(h, w);
  m.bits().block(r0, c0, rh, cw) = true;
  return m;
}

// Person 10x10 fully containing a 6x2 tie, on a wall background.
struct PersonTie {
  InstancePrediction person{kPerson, 0.997, rect(12, 12, 1, 1, 10, 10)};
  InstancePrediction tie{kTie, 0.662, rect(12, 12, 3, 5, 6, 2)};
  LabelMap stuff{12, 12, kWall};
};

FusionParams small_stuff() {
  FusionParams p;
  p.min_stuff_area = 1;
  return p;
}

Index area_of_category(const PanopticImage& img, CategoryId cat) {
  Index n = 0;
  for (const SegmentInfo& s : img.segments) n += s.category == cat ? s.area : 0;
  return n;
}

// Segments as (category, pixel set) so images compare without their ids.
std::set<std::pair<CategoryId, std::vector<bool>>> canonical(const PanopticImage& img) {
  std::set<std::pair<CategoryId, std::vector<bool>>> out;
  for (const SegmentInfo& s : img.segments) {
    const BoolGrid g = img.labels.ids() == s.id;
    out.insert({s.category, std::vector<bool>(g.data(), g.data() + g.size())});
  }
  return out;
}

std::vector<RankedInstance> random_instances(std::mt19937_64& rng, Index h, Index w, int n) {
  std::uniform_int_distribution<Index> row(0, h - 1), col(0, w - 1);
  std::uniform_int_distribution<CategoryId> cat(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RankedInstance> out;
  for (int i = 0; i < n; ++i) {
    Index r0 = row(rng), r1 = row(rng), c0 = col(rng), c1 = col(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    out.push_back({{cat(rng), u(rng), rect(h, w, r0, c0, r1 - r0 + 1, c1 - c0 + 1)}, u(rng)});
  }
  return out;
}

LabelMap random_stuff(std::mt19937_64& rng, Index h, Index w) {
  LabelMap m(h, w, 10);
  std::uniform_int_distribution<Index> row(0, h - 1);
  const Index cut = row(rng);
  m.ids().bottomRows(h - cut) = 11;
  return m;
}

}  // namespace

TEST_CASE("default parameters") {
  const FusionParams p;
  CHECK(p.max_boxes == 100);
  CHECK(p.min_stuff_area == 4900);
  CHECK(p.overlap_drop_fraction == 0.5);
  CHECK(p.mode == FusionMode::kHeuristic);
}

TEST_CASE("heuristic order hides a tie inside a person") {
  const PersonTie s;
  const std::vector<InstancePrediction> inst{s.tie, s.person};
  const PanopticImage out = merge(inst, s.stuff, small_stuff());
  CHECK(is_valid_partition(out));
  CHECK(area_of_category(out, kTie) == 0);
  CHECK(area_of_category(out, kPerson) == 100);
  CHECK(area_of_category(out, kWall) == 44);
}

TEST_CASE("ranking order shows the tie") {
  const PersonTie s;
  const std::vector<RankedInstance> inst{{s.person, 0.325}, {s.tie, 0.878}};
  FusionParams p = small_stuff();
  p.mode = FusionMode::kRanking;
  const PanopticImage out = merge(inst, s.stuff, p);
  CHECK(is_valid_partition(out));
  CHECK(area_of_category(out, kTie) == 12);
  CHECK(area_of_category(out, kPerson) == 88);
  CHECK(out.labels(3, 5) == out.segments.front().id);
  CHECK(out.segments.front().category == kTie);
  CHECK(paint_order(inst, p) == std::vector<std::size_t>{1, 0});

  p.mode = FusionMode::kHeuristic;
  CHECK(area_of_category(merge(inst, s.stuff, p), kTie) == 0);
}

TEST_CASE("disjoint instances give the same result in both modes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<RankedInstance> inst;
    for (Index k = 0; k < 4; ++k) {
      inst.push_back({{static_cast<CategoryId>(1 + k % 2), u(rng), rect(8, 20, 1, 5 * k, 4, 4)}, u(rng)});
    }
    FusionParams p = small_stuff();
    const PanopticImage heuristic = merge(inst, LabelMap(8, 20, 10), p);
    p.mode = FusionMode::kRanking;
    const PanopticImage ranking = merge(inst, LabelMap(8, 20, 10), p);
    CHECK((canonical(heuristic) == canonical(ranking)));
  }
}

TEST_CASE("stuff area boundary") {
  // 70x70 stuff minus one thing pixel: 4899 stuff pixels -> void.
  const std::vector<InstancePrediction> one{{kPerson, 0.9, rect(70, 70, 0, 0, 1, 1)}};
  PanopticImage out = merge(one, LabelMap(70, 70, kWall), FusionParams{});
  CHECK(area_of_category(out, kWall) == 0);
  CHECK((out.labels.ids() == kVoidId).count() == 4899);
  CHECK(is_valid_partition(out));

  // 71x70 minus a 70-pixel row of thing: exactly 4900 stuff pixels kept.
  const std::vector<InstancePrediction> row{{kPerson, 0.9, rect(71, 70, 0, 0, 1, 70)}};
  out = merge(row, LabelMap(71, 70, kWall), FusionParams{});
  CHECK(area_of_category(out, kWall) == 4900);
  CHECK((out.labels.ids() == kVoidId).count() == 0);
}

TEST_CASE("stuff filtering is per connected region") {
  // Wall split in two by a thing column; only the wide part survives.
  LabelMap stuff(10, 20, kWall);
  const std::vector<InstancePrediction> col{{kPerson, 0.9, rect(10, 20, 0, 3, 10, 1)}};
  FusionParams p;
  p.min_stuff_area = 50;
  const PanopticImage out = merge(col, stuff, p);
  CHECK(area_of_category(out, kWall) == 160);
  CHECK((out.labels.ids().leftCols(3) == kVoidId).all());
  CHECK(std::count_if(out.segments.begin(), out.segments.end(),
                      [](const SegmentInfo& s) { return s.category == kWall; }) == 1);
}

TEST_CASE("truncation to max_boxes by detection score") {
  std::vector<InstancePrediction> inst;
  for (int k = 0; k < 150; ++k) {
    inst.push_back({kPerson, static_cast<double>(k) / 150.0, rect(10, 15, k / 15, k % 15, 1, 1)});
  }
  const PanopticImage out = merge(inst, LabelMap(10, 15, kWall), small_stuff());
  CHECK(area_of_category(out, kPerson) == 100);
  for (int k = 0; k < 150; ++k) {
    const bool kept = out.labels(k / 15, k % 15) != kVoidId &&
                      out.find(out.labels(k / 15, k % 15))->category == kPerson;
    CHECK(kept == (k >= 50));
  }
}

TEST_CASE("truncation uses detection score even in ranking mode") {
  std::vector<RankedInstance> inst;
  for (int k = 0; k < 5; ++k) inst.push_back({{kPerson, 0.1 * (k + 1), rect(1, 5, 0, k, 1, 1)}, 1.0 - 0.1 * k});
  FusionParams p = small_stuff();
  p.mode = FusionMode::kRanking;
  p.max_boxes = 2;
  CHECK(paint_order(inst, p) == std::vector<std::size_t>{3, 4});
}

TEST_CASE("max_boxes zero yields stuff only") {
  std::mt19937_64 rng(4);
  const auto inst = random_instances(rng, 16, 16, 6);
  const LabelMap stuff = random_stuff(rng, 16, 16);
  FusionParams p;
  p.max_boxes = 0;
  p.min_stuff_area = 40;
  const PanopticImage out = merge(inst, stuff, p);
  CHECK((out.labels.ids() == merge(std::vector<RankedInstance>{}, stuff, p).labels.ids()).all());
  for (const SegmentInfo& s : out.segments) CHECK_FALSE(s.is_thing);
}

TEST_CASE("overlap drop threshold") {
  const BinaryMask big = rect(1, 10, 0, 0, 1, 4);
  // Second instance covers 8 pixels, 4 already claimed: 50% free, kept.
  const std::vector<InstancePrediction> half{{kPerson, 0.9, big}, {kTie, 0.5, rect(1, 10, 0, 0, 1, 8)}};
  CHECK(area_of_category(merge(half, LabelMap(1, 10, kWall), small_stuff()), kTie) == 4);
  // 7 pixels, 4 claimed: 3/7 free, dropped.
  const std::vector<InstancePrediction> less{{kPerson, 0.9, big}, {kTie, 0.5, rect(1, 10, 0, 0, 1, 7)}};
  CHECK(area_of_category(merge(less, LabelMap(1, 10, kWall), small_stuff()), kTie) == 0);

  FusionParams strict = small_stuff();
  strict.overlap_drop_fraction = 0.0;
  CHECK(area_of_category(merge(half, LabelMap(1, 10, kWall), strict), kTie) == 0);
  strict.overlap_drop_fraction = 1.0;
  CHECK(area_of_category(merge(less, LabelMap(1, 10, kWall), strict), kTie) == 3);
  strict.overlap_drop_fraction = 1.5;
  CHECK_THROWS_AS(merge(less, LabelMap(1, 10, kWall), strict), InvalidInputError);
}

TEST_CASE("sort keys and tie-breaks") {
  const InstancePrediction a{2, 0.5, rect(2, 2, 0, 0, 1, 1)};
  CHECK(sort_key(a, FusionMode::kHeuristic) == 0.5);
  CHECK_THROWS_AS(sort_key(a, FusionMode::kRanking), ContractError);
  const RankedInstance ra{a, 0.8};
  CHECK(sort_key(ra, FusionMode::kHeuristic) == 0.5);
  CHECK(sort_key(ra, FusionMode::kRanking) == 0.8);

  // Equal ranking keys: higher det first, then lower category, then input order.
  const BinaryMask m = rect(2, 2, 0, 0, 2, 2);
  const std::vector<RankedInstance> tied{{{3, 0.4, m}, 0.7}, {{2, 0.4, m}, 0.7}, {{2, 0.9, m}, 0.7},
                                         {{2, 0.4, m}, 0.7}};
  FusionParams p;
  p.mode = FusionMode::kRanking;
  CHECK(paint_order(tied, p) == std::vector<std::size_t>{2, 1, 3, 0});
  p.mode = FusionMode::kHeuristic;
  CHECK(paint_order(tied, p) == std::vector<std::size_t>{2, 1, 3, 0});
}

TEST_CASE("input errors") {
  const PersonTie s;
  const std::vector<InstancePrediction> inst{s.person};
  FusionParams p;
  p.mode = FusionMode::kRanking;
  CHECK_THROWS_AS(merge(inst, s.stuff, p), ContractError);
  p.mode = FusionMode::kHeuristic;
  CHECK_THROWS_AS(merge(inst, LabelMap(5, 5, kWall), p), InvalidInputError);
}

TEST_CASE("random merges are partitions, scale invariant and monotone") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    auto inst = random_instances(rng, 12, 12, 6);
    const LabelMap stuff = random_stuff(rng, 12, 12);
    FusionParams p;
    p.min_stuff_area = 10;
    p.mode = t % 2 == 0 ? FusionMode::kRanking : FusionMode::kHeuristic;
    const PanopticImage out = merge(inst, stuff, p);
    CHECK(is_valid_partition(out));

    auto scaled = inst;
    for (auto& r : scaled) {
      r.ranking_score *= 0.37;
      if (p.mode == FusionMode::kHeuristic) r.instance.det_score *= 0.37;
    }
    CHECK((merge(scaled, stuff, p) == out));

    // Raise one instance's key, holding the others fixed; the pixels it is
    // assigned must not shrink. A private category makes them countable.
    const std::size_t k = static_cast<std::size_t>(t) % inst.size();
    inst[k].instance.category = 9;
    auto raised = inst;
    if (p.mode == FusionMode::kRanking) {
      raised[k].ranking_score += 0.3;
    } else {
      raised[k].instance.det_score = std::min(1.0, raised[k].instance.det_score + 0.3);
    }
    CHECK(area_of_category(merge(raised, stuff, p), 9) >= area_of_category(merge(inst, stuff, p), 9));
  }
}

TEST_CASE("pairwise ranking order paints the same pixels as the global order") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 100; ++t) {
    const auto inst = random_instances(rng, 14, 14, 7);
    const LabelMap stuff = random_stuff(rng, 14, 14);
    FusionParams p;
    p.min_stuff_area = 5;
    p.mode = FusionMode::kRanking;
    const PanopticImage global = merge(inst, stuff, p);
    p.ranking_order = RankingOrder::kPairwise;
    const PanopticImage pairwise = merge(inst, stuff, p);
    CHECK(is_valid_partition(pairwise));
    CHECK((canonical(global) == canonical(pairwise)));
  }
}
