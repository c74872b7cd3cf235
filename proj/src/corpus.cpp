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

#include "panfuse/corpus.hpp"

#include <algorithm>
#include <cstdio>

#include "panfuse/errors.hpp"

namespace panfuse {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string scene_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", index);
  return buf;
}

CategoryTable load_categories(const fs::path& path) { return parse_categories(read_json_file(path)); }

void save_categories(const fs::path& path, const CategoryTable& table) {
  write_json_file(path, categories_to_json(table));
}

void save_annotation(const fs::path& dir, const std::string& stem, const PanopticImage& image,
                     std::int64_t image_id) {
  ensure_dir(dir);
  auto [doc, ids] = write_panoptic_annotation(image, AnnotationMeta{image_id, stem + ".png"});
  write_json_file(dir / (stem + ".json"), doc);
  write_png(dir / (stem + ".png"), ids);
}

PanopticImage load_annotation(const fs::path& json_path, const CategoryTable& categories,
                              AnnotationMeta* meta) {
  const Json doc = read_json_file(json_path);
  const AnnotationMeta m = read_annotation_meta(doc);
  const IdImage ids = read_png(json_path.parent_path() / m.file_name);
  if (meta != nullptr) *meta = m;
  return read_panoptic_annotation(doc, ids, categories);
}

std::vector<std::string> list_stems(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (ends_with(name, suffix)) stems.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

Dataset load_dataset(const fs::path& dir, const CategoryTable& categories) {
  Dataset out;
  for (const std::string& stem : list_stems(dir, ".json")) {
    if (stem + ".json" == kCategoriesFile || stem + ".json" == kManifestFile) continue;
    if (stem.find('.') != std::string::npos) continue;
    out.emplace(stem, load_annotation(dir / (stem + ".json"), categories));
  }
  return out;
}

void write_corpus(const fs::path& root, std::span<const Scene> scenes, const SceneSpec& spec) {
  const fs::path gt_dir = root / "gt";
  const fs::path inputs = root / "inputs";
  ensure_dir(gt_dir);
  ensure_dir(inputs);
  save_categories(gt_dir / kCategoriesFile, synth_categories());

  Json stems = Json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    const std::string stem = scene_stem(i);
    stems.push_back(stem);
    save_annotation(gt_dir, stem, scene.gt, static_cast<std::int64_t>(i));
    write_json_file(inputs / (stem + kInstancesSuffix), instances_to_json(scene.preds));
    const auto oracle = oracle_ranking_scores(scene.gt, scene.preds);
    write_json_file(inputs / (stem + kOracleSuffix), ranked_instances_to_json(oracle));
    write_stuff_map(inputs / (stem + kStuffSuffix), scene.stuff);
    Json pairs = Json::array();
    for (const OcclusionPair& p : scene.pairs) pairs.push_back({p.occluder, p.occludee});
    write_json_file(inputs / (stem + kPairsSuffix), pairs);
  }
  Json manifest{{"count", scenes.size()},
                {"seed", spec.seed},
                {"width", spec.width},
                {"height", spec.height},
                {"things", spec.n_things},
                {"stuff_regions", spec.n_stuff_regions},
                {"pairs", spec.occlusion_pairs},
                {"score_bias", spec.score_bias},
                {"noise", spec.noise},
                {"scenes", std::move(stems)}};
  write_json_file(root / kManifestFile, manifest);
}

std::vector<CorpusScene> read_corpus(const fs::path& root) {
  const fs::path gt_dir = root / "gt";
  const fs::path inputs = root / "inputs";
  const CategoryTable categories = load_categories(gt_dir / kCategoriesFile);
  std::vector<CorpusScene> out;
  for (const std::string& stem : list_stems(inputs, kInstancesSuffix)) {
    CorpusScene cs;
    cs.stem = stem;
    cs.scene.gt = load_annotation(gt_dir / (stem + ".json"), categories);
    cs.scene.preds = parse_instances(read_json_file(inputs / (stem + kInstancesSuffix)), inputs);
    cs.scene.stuff = read_stuff_map(inputs / (stem + kStuffSuffix));
    const fs::path pairs_path = inputs / (stem + kPairsSuffix);
    if (fs::exists(pairs_path)) {
      for (const Json& p : read_json_file(pairs_path)) {
        cs.scene.pairs.push_back(OcclusionPair{p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
      }
    }
    out.push_back(std::move(cs));
  }
  return out;
}

Json annotations_to_coco(const fs::path& dir, const fs::path& categories_path) {
  const CategoryTable categories =
      load_categories(categories_path.empty() ? dir / kCategoriesFile : categories_path);
  Json images = Json::array();
  Json annotations = Json::array();
  for (const std::string& stem : list_stems(dir, ".json")) {
    if (stem + ".json" == kCategoriesFile || stem + ".json" == kManifestFile) continue;
    if (stem.find('.') != std::string::npos) continue;
    const Json doc = read_json_file(dir / (stem + ".json"));
    const AnnotationMeta meta = read_annotation_meta(doc);
    const IdImage ids = read_png(dir / meta.file_name);
    read_panoptic_annotation(doc, ids, categories);
    images.push_back(Json{{"id", meta.image_id},
                          {"file_name", stem + ".jpg"},
                          {"width", ids.width},
                          {"height", ids.height}});
    annotations.push_back(doc);
  }
  return Json{{"images", std::move(images)},
              {"annotations", std::move(annotations)},
              {"categories", categories_to_json(categories)}};
}

void coco_to_annotations(const Json& coco, const fs::path& png_dir, const fs::path& out_dir) {
  const CategoryTable categories = [&] {
    if (!coco.is_object() || !coco.contains("categories") || !coco.contains("annotations")) {
      throw SchemaError("COCO panoptic document needs \"annotations\" and \"categories\"");
    }
    return parse_categories(coco.at("categories"));
  }();
  ensure_dir(out_dir);
  save_categories(out_dir / kCategoriesFile, categories);
  for (const Json& doc : coco.at("annotations")) {
    const AnnotationMeta meta = read_annotation_meta(doc);
    const IdImage ids = read_png(png_dir / meta.file_name);
    const PanopticImage image = read_panoptic_annotation(doc, ids, categories);
    const std::string stem = fs::path(meta.file_name).stem().string();
    auto [out_doc, out_ids] = write_panoptic_annotation(image, meta);
    write_json_file(out_dir / (stem + ".json"), out_doc);
    write_png(out_dir / meta.file_name, out_ids);
  }
}

}  // namespace panfuse
