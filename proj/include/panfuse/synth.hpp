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

#ifndef PANFUSE_SYNTH_HPP_
#define PANFUSE_SYNTH_HPP_

// Synthetic panoptic scenes with planted occlusions.
//
// Stuff is a stack of horizontal bands. Things are axis-aligned rectangles or
// ellipses. A planted pair nests an occludee strictly inside its occluder: the
// ground truth carves the occludee out of the occluder, while the simulated
// instance predictions keep the full occluder mask, so the two overlap.
//
// Taxonomy: things 1, 2 are the large occluder classes and 3, 4 the small
// occludee classes; stuff categories are 5..8.

#include <cstdint>
#include <span>
#include <vector>

#include "panfuse/format.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

struct SceneSpec {
  Index width = 64;
  Index height = 64;
  Index n_things = 4;
  Index n_stuff_regions = 3;
  Index occlusion_pairs = 1;
  // Probability that the occluder's detection score is forced above the
  // occludee's; also shifts the two Beta means apart.
  double score_bias = 1.0;
  // Flip probability for each mask-boundary pixel.
  double noise = 0.0;
  std::uint64_t seed = 0;
};

// Indices into Scene::preds.
struct OcclusionPair {
  std::size_t occluder = 0;
  std::size_t occludee = 0;

  friend bool operator==(const OcclusionPair&, const OcclusionPair&) = default;
};

struct Scene {
  PanopticImage gt;
  std::vector<InstancePrediction> preds;
  StuffProbMap stuff;
  std::vector<OcclusionPair> pairs;

  friend bool operator==(const Scene&, const Scene&) = default;
};

CategoryTable synth_categories();
std::vector<CategoryId> synth_stuff_categories();

// Throws InvalidInputError for an invalid spec and GenerationError when the
// shapes cannot be packed within the retry budget.
Scene generate(const SceneSpec& spec);

// Seed of scene `index` in a corpus: splitmix64(master + 0x9E3779B97F4A7C15 * (index + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// `count` scenes sharing `spec` except for their derived seeds.
std::vector<Scene> generate_corpus(const SceneSpec& spec, std::size_t count, unsigned jobs = 1);

inline constexpr double kOracleFront = 0.9;
inline constexpr double kOracleBack = 0.1;
inline constexpr double kOracleNeutral = 0.5;

// Upper-bound scorer. Two predictions overlapping on at least half of the
// smaller mask form a pair; the one whose category owns more ground-truth
// pixels in the overlap is in front (0.9), the other behind (0.1). Everything
// else scores 0.5.
std::vector<RankedInstance> oracle_ranking_scores(const PanopticImage& gt,
                                                  std::span<const InstancePrediction> preds);

}  // namespace panfuse

#endif  // PANFUSE_SYNTH_HPP_
