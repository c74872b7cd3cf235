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

#include "panfuse/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

#include "panfuse/errors.hpp"

namespace panfuse {

namespace {

struct Candidate {
  const InstancePrediction* inst;
  double ranking;
  std::size_t input;
};

bool det_before(const Candidate& a, const Candidate& b) {
  if (a.inst->det_score != b.inst->det_score) return a.inst->det_score > b.inst->det_score;
  if (a.inst->category != b.inst->category) return a.inst->category < b.inst->category;
  return a.input < b.input;
}

bool key_before(const Candidate& a, const Candidate& b, FusionMode mode) {
  if (mode == FusionMode::kRanking && a.ranking != b.ranking) return a.ranking > b.ranking;
  return det_before(a, b);
}

bool overlaps(const BinaryMask& a, const BinaryMask& b) {
  return (a.bits() && b.bits()).any();
}

std::vector<Candidate> ordered(std::vector<Candidate> all, const FusionParams& params) {
  std::sort(all.begin(), all.end(), det_before);
  if (all.size() > params.max_boxes) all.resize(params.max_boxes);
  if (params.mode == FusionMode::kHeuristic) return all;

  if (params.ranking_order == RankingOrder::kGlobal) {
    std::sort(all.begin(), all.end(),
              [](const Candidate& a, const Candidate& b) { return key_before(a, b, FusionMode::kRanking); });
    return all;
  }

  // Topological order of the "overlaps and ranks higher" relation, choosing
  // among ready instances by detection order. `all` is in detection order, so
  // position doubles as priority.
  const std::size_t n = all.size();
  std::vector<std::vector<std::size_t>> after(n);
  std::vector<std::size_t> blockers(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!overlaps(all[i].inst->mask, all[j].inst->mask)) continue;
      const bool i_first = key_before(all[i], all[j], FusionMode::kRanking);
      after[i_first ? i : j].push_back(i_first ? j : i);
      ++blockers[i_first ? j : i];
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (blockers[i] == 0) ready.push(i);
  }
  std::vector<Candidate> out;
  out.reserve(n);
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    out.push_back(all[i]);
    for (std::size_t j : after[i]) {
      if (--blockers[j] == 0) ready.push(j);
    }
  }
  return out;
}

PanopticImage merge_candidates(const std::vector<Candidate>& candidates, const LabelMap& stuff,
                               const FusionParams& params) {
  if (!(params.overlap_drop_fraction >= 0.0 && params.overlap_drop_fraction <= 1.0)) {
    throw InvalidInputError("merge: overlap_drop_fraction must lie in [0, 1]");
  }
  const Index h = stuff.height();
  const Index w = stuff.width();
  for (const Candidate& c : candidates) {
    if (c.inst->mask.height() != h || c.inst->mask.width() != w) {
      throw InvalidInputError("merge: instance mask and stuff map differ in size");
    }
  }

  PanopticImage out;
  out.labels = LabelMap(h, w);
  BoolGrid claimed = BoolGrid::Constant(h, w, false);
  SegmentId next_id = 1;
  const double keep_fraction = 1.0 - params.overlap_drop_fraction;

  for (const Candidate& c : ordered(candidates, params)) {
    const BinaryMask& mask = c.inst->mask;
    const BoolGrid free = mask.bits() && !claimed;
    const Index n_free = free.count();
    if (n_free == 0 || static_cast<double>(n_free) < keep_fraction * static_cast<double>(mask.area())) {
      continue;
    }
    const SegmentId id = next_id++;
    out.labels.ids() = free.select(IdGrid::Constant(h, w, id), out.labels.ids());
    claimed = claimed || free;
    out.segments.push_back(SegmentInfo{id, c.inst->category, true, n_free});
  }

  std::map<CategoryId, bool> stuff_categories;
  for (Index i = 0; i < stuff.ids().size(); ++i) {
    if (!claimed.data()[i] && stuff.ids().data()[i] != kVoidId) {
      stuff_categories[stuff.ids().data()[i]] = true;
    }
  }
  for (const auto& [category, unused] : stuff_categories) {
    const BinaryMask region(BoolGrid(!claimed && stuff.ids() == category));
    const ComponentLabels parts = label_components(region, Connectivity::kFour);
    BoolGrid kept = BoolGrid::Constant(h, w, false);
    Index area = 0;
    for (std::int32_t k = 0; k < parts.count; ++k) {
      if (parts.areas[static_cast<std::size_t>(k)] < params.min_stuff_area) continue;
      kept = kept || (parts.index == k);
      area += parts.areas[static_cast<std::size_t>(k)];
    }
    if (area == 0) continue;
    const SegmentId id = next_id++;
    out.labels.ids() = kept.select(IdGrid::Constant(h, w, id), out.labels.ids());
    out.segments.push_back(SegmentInfo{id, category, false, area});
  }
  return out;
}

std::vector<Candidate> ranked_candidates(std::span<const RankedInstance> instances) {
  std::vector<Candidate> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.push_back(Candidate{&instances[i].instance, instances[i].ranking_score, i});
  }
  return out;
}

}  // namespace

double sort_key(const InstancePrediction& inst, FusionMode mode) {
  if (mode == FusionMode::kRanking) {
    throw ContractError("sort_key: ranking mode needs a ranking score");
  }
  return inst.det_score;
}

double sort_key(const RankedInstance& inst, FusionMode mode) {
  return mode == FusionMode::kRanking ? inst.ranking_score : inst.instance.det_score;
}

std::vector<std::size_t> paint_order(std::span<const RankedInstance> instances,
                                     const FusionParams& params) {
  std::vector<std::size_t> out;
  for (const Candidate& c : ordered(ranked_candidates(instances), params)) out.push_back(c.input);
  return out;
}

PanopticImage merge(std::span<const InstancePrediction> instances, const LabelMap& stuff,
                    const FusionParams& params) {
  if (params.mode == FusionMode::kRanking) {
    throw ContractError("merge: ranking mode needs instances with ranking scores");
  }
  std::vector<Candidate> candidates;
  candidates.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    candidates.push_back(Candidate{&instances[i], 0.0, i});
  }
  return merge_candidates(candidates, stuff, params);
}

PanopticImage merge(std::span<const RankedInstance> instances, const LabelMap& stuff,
                    const FusionParams& params) {
  return merge_candidates(ranked_candidates(instances), stuff, params);
}

}  // namespace panfuse
