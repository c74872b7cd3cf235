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

#include "panfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "panfuse/errors.hpp"
#include "panfuse/parallel.hpp"

namespace panfuse {

namespace {

constexpr CategoryId kOccluderClasses[] = {1, 2};
constexpr CategoryId kOccludeeClasses[] = {3, 4};
constexpr CategoryId kThingClasses[] = {1, 2, 3, 4};
constexpr CategoryId kStuffClasses[] = {5, 6, 7, 8};
constexpr int kPlacementRetries = 200;
constexpr double kMaxOccludeeFraction = 0.4;

struct Shape {
  bool ellipse = false;
  Index r0 = 0, c0 = 0, h = 0, w = 0;

  bool boxes_touch(const Shape& o, Index gap) const {
    return r0 - gap < o.r0 + o.h && o.r0 - gap < r0 + h && c0 - gap < o.c0 + o.w &&
           o.c0 - gap < c0 + w;
  }
};

BinaryMask rasterize(const Shape& s, Index height, Index width) {
  BinaryMask mask(height, width);
  const double cy = static_cast<double>(s.r0) + 0.5 * static_cast<double>(s.h);
  const double cx = static_cast<double>(s.c0) + 0.5 * static_cast<double>(s.w);
  const double ry = 0.5 * static_cast<double>(s.h);
  const double rx = 0.5 * static_cast<double>(s.w);
  for (Index r = s.r0; r < s.r0 + s.h; ++r) {
    for (Index c = s.c0; c < s.c0 + s.w; ++c) {
      if (!s.ellipse) {
        mask.set(r, c);
        continue;
      }
      const double dy = (static_cast<double>(r) + 0.5 - cy) / ry;
      const double dx = (static_cast<double>(c) + 0.5 - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) mask.set(r, c);
    }
  }
  return mask;
}

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  Index uniform_int(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(engine_);
  }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double beta(double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
    const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
    return x / (x + y);
  }
  template <typename T, std::size_t N>
  T pick(const T (&items)[N]) {
    return items[static_cast<std::size_t>(uniform_int(0, static_cast<Index>(N) - 1))];
  }

 private:
  std::mt19937_64 engine_;
};

void validate(const SceneSpec& spec) {
  if (spec.width < 4 || spec.height < 4) throw InvalidInputError("scene: image must be at least 4x4");
  if (spec.n_things < 0 || spec.occlusion_pairs < 0 || spec.n_stuff_regions < 0) {
    throw InvalidInputError("scene: counts must be non-negative");
  }
  if (2 * spec.occlusion_pairs > spec.n_things) {
    throw InvalidInputError("scene: occlusion_pairs must not exceed n_things / 2");
  }
  if (spec.n_stuff_regions > spec.height) {
    throw InvalidInputError("scene: more stuff regions than image rows");
  }
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0) || !(spec.score_bias >= 0.0 && spec.score_bias <= 1.0)) {
    throw InvalidInputError("scene: noise and score_bias must lie in [0, 1]");
  }
}

Shape random_shape(SceneRng& rng, Index lo, Index hi, Index height, Index width) {
  Shape s;
  s.ellipse = rng.uniform() < 0.5;
  s.h = rng.uniform_int(lo, std::min(hi, height));
  s.w = rng.uniform_int(lo, std::min(hi, width));
  s.r0 = rng.uniform_int(0, height - s.h);
  s.c0 = rng.uniform_int(0, width - s.w);
  return s;
}

Shape place_top_level(SceneRng& rng, const std::vector<Shape>& placed, Index lo, Index hi,
                      const SceneSpec& spec) {
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    Shape s = random_shape(rng, lo, hi, spec.height, spec.width);
    const bool clear = std::none_of(placed.begin(), placed.end(),
                                    [&](const Shape& o) { return s.boxes_touch(o, 1); });
    if (clear) return s;
  }
  throw GenerationError("scene: could not place a shape after " +
                        std::to_string(kPlacementRetries) + " attempts");
}

// Pixels of `inner` all lie in `outer` together with their 4-neighbours.
bool strictly_inside(const BinaryMask& inner, const BinaryMask& outer) {
  for (Index r = 0; r < inner.height(); ++r) {
    for (Index c = 0; c < inner.width(); ++c) {
      if (!inner(r, c)) continue;
      if (r == 0 || c == 0 || r + 1 == inner.height() || c + 1 == inner.width()) return false;
      if (!outer(r, c) || !outer(r - 1, c) || !outer(r + 1, c) || !outer(r, c - 1) || !outer(r, c + 1)) {
        return false;
      }
    }
  }
  return true;
}

Shape place_inside(SceneRng& rng, const Shape& outer, const BinaryMask& outer_mask,
                   const SceneSpec& spec) {
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    Shape s;
    s.ellipse = rng.uniform() < 0.5;
    s.h = std::max<Index>(2, static_cast<Index>(std::lround((0.3 + 0.2 * rng.uniform()) * outer.h)));
    s.w = std::max<Index>(2, static_cast<Index>(std::lround((0.3 + 0.2 * rng.uniform()) * outer.w)));
    s.r0 = outer.r0 + rng.uniform_int(0, outer.h - s.h);
    s.c0 = outer.c0 + rng.uniform_int(0, outer.w - s.w);
    const BinaryMask mask = rasterize(s, spec.height, spec.width);
    if (mask.area() < 2) continue;
    if (static_cast<double>(mask.area()) > kMaxOccludeeFraction * static_cast<double>(outer_mask.area())) {
      continue;
    }
    if (strictly_inside(mask, outer_mask)) return s;
  }
  throw GenerationError("scene: could not nest an occludee after " +
                        std::to_string(kPlacementRetries) + " attempts");
}

BinaryMask perturb(const BinaryMask& mask, double noise, SceneRng& rng) {
  if (noise <= 0.0) return mask;
  BinaryMask out = mask;
  const Index h = mask.height();
  const Index w = mask.width();
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      bool boundary = false;
      const Index dr[] = {-1, 1, 0, 0};
      const Index dc[] = {0, 0, -1, 1};
      for (int k = 0; k < 4 && !boundary; ++k) {
        const Index rr = r + dr[k];
        const Index cc = c + dc[k];
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        boundary = mask(rr, cc) != mask(r, c);
      }
      if (boundary && rng.uniform() < noise) out.set(r, c, !mask(r, c));
    }
  }
  return out.empty() ? mask : out;
}

}  // namespace

CategoryTable synth_categories() {
  CategoryTable table;
  const char* thing_names[] = {"large_a", "large_b", "small_a", "small_b"};
  const char* stuff_names[] = {"band_a", "band_b", "band_c", "band_d"};
  for (int i = 0; i < 4; ++i) {
    table[kThingClasses[i]] = Category{kThingClasses[i], thing_names[i], true};
    table[kStuffClasses[i]] = Category{kStuffClasses[i], stuff_names[i], false};
  }
  return table;
}

std::vector<CategoryId> synth_stuff_categories() {
  return {std::begin(kStuffClasses), std::end(kStuffClasses)};
}

Scene generate(const SceneSpec& spec) {
  validate(spec);
  SceneRng rng(spec.seed);
  const Index H = spec.height;
  const Index W = spec.width;

  // Stuff bands.
  IdGrid stuff_sem = IdGrid::Zero(H, W);
  if (spec.n_stuff_regions > 0) {
    std::vector<Index> cuts{0, H};
    while (static_cast<Index>(cuts.size()) < spec.n_stuff_regions + 1) {
      const Index cut = rng.uniform_int(1, H - 1);
      if (std::find(cuts.begin(), cuts.end(), cut) == cuts.end()) cuts.push_back(cut);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
      const CategoryId cat = rng.pick(kStuffClasses);
      stuff_sem.middleRows(cuts[b], cuts[b + 1] - cuts[b]).setConstant(cat);
    }
  }

  // Things: pairs first (occluder, occludee), then isolated instances.
  struct Planned {
    Shape shape;
    CategoryId category;
    BinaryMask mask;
  };
  std::vector<Planned> things;
  std::vector<Shape> top_level;
  const Index big_lo = std::max<Index>(8, std::min(H, W) / 4);
  const Index big_hi = std::max<Index>(big_lo, std::min(H, W) * 2 / 5);
  const Index small_lo = std::max<Index>(3, std::min(H, W) / 8);
  const Index small_hi = std::max<Index>(small_lo, std::min(H, W) / 4);
  Scene scene;
  for (Index p = 0; p < spec.occlusion_pairs; ++p) {
    const Shape outer = place_top_level(rng, top_level, big_lo, big_hi, spec);
    top_level.push_back(outer);
    BinaryMask outer_mask = rasterize(outer, H, W);
    const Shape inner = place_inside(rng, outer, outer_mask, spec);
    scene.pairs.push_back(OcclusionPair{things.size(), things.size() + 1});
    things.push_back(Planned{outer, rng.pick(kOccluderClasses), std::move(outer_mask)});
    things.push_back(Planned{inner, rng.pick(kOccludeeClasses), rasterize(inner, H, W)});
  }
  for (Index i = 2 * spec.occlusion_pairs; i < spec.n_things; ++i) {
    const Shape s = place_top_level(rng, top_level, small_lo, small_hi, spec);
    top_level.push_back(s);
    things.push_back(Planned{s, rng.pick(kThingClasses), rasterize(s, H, W)});
  }

  // Ground truth: top-level things, then occludees carved into their occluder.
  scene.gt.labels = LabelMap(H, W);
  std::vector<bool> is_occludee(things.size(), false);
  for (const OcclusionPair& pair : scene.pairs) is_occludee[pair.occludee] = true;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < things.size(); ++i) {
      if (is_occludee[i] == (pass == 1)) {
        scene.gt.labels.paint(things[i].mask, static_cast<SegmentId>(i + 1));
      }
    }
  }
  for (std::size_t i = 0; i < things.size(); ++i) {
    const Index area = (scene.gt.labels.ids() == static_cast<SegmentId>(i + 1)).count();
    scene.gt.segments.push_back(SegmentInfo{static_cast<SegmentId>(i + 1), things[i].category, true, area});
  }
  SegmentId next_id = static_cast<SegmentId>(things.size() + 1);
  for (CategoryId cat : kStuffClasses) {
    const BoolGrid region = scene.gt.labels.ids() == kVoidId && stuff_sem == cat;
    const Index area = region.count();
    if (area == 0) continue;
    scene.gt.labels.ids() = region.select(IdGrid::Constant(H, W, next_id), scene.gt.labels.ids());
    scene.gt.segments.push_back(SegmentInfo{next_id, cat, false, area});
    ++next_id;
  }

  // Predictions keep full (overlapping) masks.
  std::vector<double> scores(things.size());
  for (const OcclusionPair& pair : scene.pairs) {
    double front = rng.beta(2.0 + 8.0 * spec.score_bias, 2.0);
    double back = rng.beta(2.0, 2.0 + 8.0 * spec.score_bias);
    if (rng.uniform() < spec.score_bias && front <= back) {
      std::swap(front, back);
      if (front == back) back = std::nextafter(front, 0.0);
    }
    scores[pair.occluder] = front;
    scores[pair.occludee] = back;
  }
  for (std::size_t i = 2 * static_cast<std::size_t>(spec.occlusion_pairs); i < things.size(); ++i) {
    scores[i] = rng.beta(4.0, 2.0);
  }
  for (std::size_t i = 0; i < things.size(); ++i) {
    scene.preds.push_back(
        InstancePrediction{things[i].category, scores[i], perturb(things[i].mask, spec.noise, rng)});
  }

  // Stuff probabilities: the band's category always wins the argmax.
  scene.stuff.categories = synth_stuff_categories();
  if (spec.n_stuff_regions == 0) scene.stuff.categories.insert(scene.stuff.categories.begin(), kVoidId);
  const std::size_t depth = scene.stuff.categories.size();
  scene.stuff.channels.assign(depth, ProbPlane::Zero(H, W));
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      const CategoryId truth = stuff_sem(r, c);
      for (std::size_t k = 0; k < depth; ++k) {
        const double u = rng.uniform();
        scene.stuff.channels[k](r, c) =
            scene.stuff.categories[k] == truth ? 1.0 + u : 0.8 * u;
      }
    }
  }
  scene.stuff.normalize();
  return scene;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<Scene> generate_corpus(const SceneSpec& spec, std::size_t count, unsigned jobs) {
  std::vector<Scene> out(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    SceneSpec local = spec;
    local.seed = derive_seed(spec.seed, i);
    out[i] = generate(local);
  });
  return out;
}

std::vector<RankedInstance> oracle_ranking_scores(const PanopticImage& gt,
                                                  std::span<const InstancePrediction> preds) {
  std::map<SegmentId, CategoryId> thing_category;
  for (const SegmentInfo& s : gt.segments) {
    if (s.is_thing) thing_category[s.id] = s.category;
  }
  auto category_pixels = [&](const BoolGrid& region, CategoryId cat) {
    Index n = 0;
    for (Index r = 0; r < region.rows(); ++r) {
      for (Index c = 0; c < region.cols(); ++c) {
        if (!region(r, c)) continue;
        auto it = thing_category.find(gt.labels(r, c));
        if (it != thing_category.end() && it->second == cat) ++n;
      }
    }
    return n;
  };

  std::vector<RankedInstance> out;
  for (const InstancePrediction& p : preds) out.push_back(RankedInstance{p, kOracleNeutral});
  std::vector<bool> fixed_front(preds.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = i + 1; j < preds.size(); ++j) {
      const BoolGrid overlap = preds[i].mask.bits() && preds[j].mask.bits();
      const Index n = overlap.count();
      if (n == 0 || 2 * n < std::min(preds[i].mask.area(), preds[j].mask.area())) continue;
      Index own_i = category_pixels(overlap, preds[i].category);
      Index own_j = category_pixels(overlap, preds[j].category);
      if (preds[i].category == preds[j].category) {
        own_i = preds[j].mask.area();
        own_j = preds[i].mask.area();
      }
      const std::size_t front = own_i >= own_j ? i : j;
      const std::size_t back = front == i ? j : i;
      out[front].ranking_score = kOracleFront;
      fixed_front[front] = true;
      if (!fixed_front[back]) out[back].ranking_score = kOracleBack;
    }
  }
  return out;
}

}  // namespace panfuse
