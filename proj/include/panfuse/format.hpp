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

#ifndef PANFUSE_FORMAT_HPP_
#define PANFUSE_FORMAT_HPP_

// On-disk layouts: COCO-style id-encoded RGB images, per-image panoptic
// annotation records, instance prediction arrays and stuff probability maps.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

using Json = nlohmann::ordered_json;

inline constexpr SegmentId kMaxEncodableId = (1 << 24) - 1;

struct IdImage {
  Index width = 0;
  Index height = 0;
  // Interleaved RGB, row-major, 3 bytes per pixel.
  std::vector<std::uint8_t> rgb;

  friend bool operator==(const IdImage&, const IdImage&) = default;
};

// id = r + 256 g + 65536 b.
IdImage encode_ids(const LabelMap& map);
LabelMap decode_ids(const IdImage& image);

IdImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const IdImage& image);
std::vector<std::uint8_t> encode_png(const IdImage& image);

struct Category {
  CategoryId id = 0;
  std::string name;
  bool is_thing = false;

  friend bool operator==(const Category&, const Category&) = default;
};

using CategoryTable = std::map<CategoryId, Category>;

// COCO "categories" array: [{"id", "name", "isthing"}].
CategoryTable parse_categories(const Json& doc);
Json categories_to_json(const CategoryTable& table);

struct AnnotationMeta {
  std::int64_t image_id = 0;
  std::string file_name;

  friend bool operator==(const AnnotationMeta&, const AnnotationMeta&) = default;
};

// Per-image record {"image_id", "file_name", "segments_info": [{"id",
// "category_id", "area", "iscrowd", "bbox"}]}. Areas are recomputed from the
// pixels; segment order follows the document.
PanopticImage read_panoptic_annotation(const Json& doc, const IdImage& ids,
                                       const CategoryTable& categories);
AnnotationMeta read_annotation_meta(const Json& doc);
std::pair<Json, IdImage> write_panoptic_annotation(const PanopticImage& image,
                                                   const AnnotationMeta& meta);

struct InstancePrediction {
  CategoryId category = 0;
  double det_score = 0.0;
  BinaryMask mask;

  friend bool operator==(const InstancePrediction&, const InstancePrediction&) = default;
};

struct RankedInstance {
  InstancePrediction instance;
  double ranking_score = 0.0;

  friend bool operator==(const RankedInstance&, const RankedInstance&) = default;
};

// Instance prediction files are JSON arrays of
//   {"category_id": int, "score": real, "mask_rows": ["0110", ...]}
// or, instead of "mask_rows", "mask_file": a PNG path relative to `base_dir`
// whose nonzero pixels form the mask. An optional "ranking_score" carries the
// spatial ranking score.
std::vector<InstancePrediction> parse_instances(const Json& doc,
                                                const std::filesystem::path& base_dir = {});
// Throws ContractError when any element lacks "ranking_score".
std::vector<RankedInstance> parse_ranked_instances(const Json& doc,
                                                   const std::filesystem::path& base_dir = {});
bool has_ranking_scores(const Json& doc);
Json instances_to_json(std::span<const InstancePrediction> instances);
Json ranked_instances_to_json(std::span<const RankedInstance> instances);

using ProbPlane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// K channels of per-pixel stuff probabilities; channel k belongs to
// categories[k]. Category 0, when listed, is a void channel.
struct StuffProbMap {
  std::vector<CategoryId> categories;
  std::vector<ProbPlane> channels;

  Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
  Index width() const { return channels.empty() ? 0 : channels.front().cols(); }
  std::size_t depth() const { return channels.size(); }

  // Divides every pixel by its channel sum (pixels summing to 0 become uniform).
  void normalize();
  bool is_normalized(double tolerance = 1e-5) const;

  friend bool operator==(const StuffProbMap& a, const StuffProbMap& b);
};

StuffProbMap stuff_from_logits(std::vector<CategoryId> categories,
                               const std::vector<ProbPlane>& logits);

// Per-pixel argmax; ties go to the lowest category id.
LabelMap stuff_argmax(const StuffProbMap& probs, std::span<const CategoryId> categories);
LabelMap stuff_argmax(const StuffProbMap& probs);

// Binary .spm record, little-endian: "PSPM", u32 version (1), u32 K, u32 H,
// u32 W, i32 categories[K], f64 probs[K][H][W].
void write_stuff_map(const std::filesystem::path& path, const StuffProbMap& probs);
StuffProbMap read_stuff_map(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
// Writes `doc` with 2-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& doc);

}  // namespace panfuse

#endif  // PANFUSE_FORMAT_HPP_
