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

#ifndef PANFUSE_FUSION_HPP_
#define PANFUSE_FUSION_HPP_

// Instance + stuff merging into a single panoptic partition.
//
// 1. keep the `max_boxes` instances with the highest detection score;
// 2. paint instances in descending sort-key order (detection score in
//    heuristic mode, spatial ranking score in ranking mode); an instance only
//    claims free pixels and is dropped when its free fraction is below
//    1 - overlap_drop_fraction;
// 3. free pixels take the stuff label;
// 4. 4-connected stuff regions smaller than `min_stuff_area` become void.

#include <cstddef>
#include <span>
#include <vector>

#include "panfuse/format.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

enum class FusionMode { kHeuristic, kRanking };

// kGlobal re-sorts every instance by ranking score. kPairwise keeps detection
// order and lets the ranking score decide only between overlapping instances.
enum class RankingOrder { kGlobal, kPairwise };

struct FusionParams {
  std::size_t max_boxes = 100;
  Index min_stuff_area = 4900;
  double overlap_drop_fraction = 0.5;
  FusionMode mode = FusionMode::kHeuristic;
  RankingOrder ranking_order = RankingOrder::kGlobal;
};

// Throws ContractError for a plain prediction in ranking mode.
double sort_key(const InstancePrediction& inst, FusionMode mode);
double sort_key(const RankedInstance& inst, FusionMode mode);

// Indices into `instances` in painting order, after max_boxes truncation.
// Equal keys fall back to higher det_score, then lower category id, then
// input order.
std::vector<std::size_t> paint_order(std::span<const RankedInstance> instances,
                                     const FusionParams& params);

// `stuff` holds stuff category ids (0 = void). Thing segments get ids 1..n in
// painting order; stuff segments follow in ascending category order.
PanopticImage merge(std::span<const InstancePrediction> instances, const LabelMap& stuff,
                    const FusionParams& params);
PanopticImage merge(std::span<const RankedInstance> instances, const LabelMap& stuff,
                    const FusionParams& params);

}  // namespace panfuse

#endif  // PANFUSE_FUSION_HPP_
