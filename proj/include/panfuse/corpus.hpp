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

#ifndef PANFUSE_CORPUS_HPP_
#define PANFUSE_CORPUS_HPP_

// Directory layouts shared by the command-line tools.
//
// Annotation directory: categories.json plus per-image record pairs
// <stem>.json / <stem>.png.
//
// Synthetic corpus:
//   manifest.json
//   gt/categories.json, gt/<stem>.json, gt/<stem>.png
//   inputs/<stem>.instances.json   detection-scored predictions
//   inputs/<stem>.oracle.json      predictions with oracle ranking scores
//   inputs/<stem>.stuff.spm        stuff probability map
//   inputs/<stem>.pairs.json       planted [occluder, occludee] index pairs

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "panfuse/format.hpp"
#include "panfuse/pq.hpp"
#include "panfuse/synth.hpp"

namespace panfuse {

inline constexpr const char* kCategoriesFile = "categories.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kInstancesSuffix = ".instances.json";
inline constexpr const char* kOracleSuffix = ".oracle.json";
inline constexpr const char* kRankedSuffix = ".ranked.json";
inline constexpr const char* kStuffSuffix = ".stuff.spm";
inline constexpr const char* kPairsSuffix = ".pairs.json";

std::string scene_stem(std::size_t index);

CategoryTable load_categories(const std::filesystem::path& path);
void save_categories(const std::filesystem::path& path, const CategoryTable& table);

// Writes <dir>/<stem>.json and <dir>/<stem>.png.
void save_annotation(const std::filesystem::path& dir, const std::string& stem,
                     const PanopticImage& image, std::int64_t image_id);
PanopticImage load_annotation(const std::filesystem::path& json_path, const CategoryTable& categories,
                              AnnotationMeta* meta = nullptr);

// Every <stem>.json in `dir` except categories.json and manifest.json, keyed
// by stem.
Dataset load_dataset(const std::filesystem::path& dir, const CategoryTable& categories);

// Sorted stems of files in `dir` named <stem><suffix>.
std::vector<std::string> list_stems(const std::filesystem::path& dir, const std::string& suffix);

struct CorpusScene {
  std::string stem;
  Scene scene;
};

void write_corpus(const std::filesystem::path& root, std::span<const Scene> scenes,
                  const SceneSpec& spec);
std::vector<CorpusScene> read_corpus(const std::filesystem::path& root);

// One COCO panoptic document ({"images", "annotations", "categories"}) from
// an annotation directory, and back. An empty categories path means
// <dir>/categories.json.
Json annotations_to_coco(const std::filesystem::path& dir,
                         const std::filesystem::path& categories_path = {});
void coco_to_annotations(const Json& coco, const std::filesystem::path& png_dir,
                         const std::filesystem::path& out_dir);

}  // namespace panfuse

#endif  // PANFUSE_CORPUS_HPP_
