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

#include "panfuse/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include "binary_io.hpp"
#include "panfuse/errors.hpp"

namespace panfuse {

namespace {

constexpr char kStuffMagic[4] = {'P', 'S', 'P', 'M'};
constexpr std::uint32_t kStuffVersion = 1;

template <typename Fn>
auto schema_guard(const char* context, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string(context) + ": " + e.what());
  }
}

const Json& require(const Json& obj, const char* key, const char* context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(std::string(context) + ": missing field \"" + key + "\"");
  }
  return obj.at(key);
}

BinaryMask mask_from_rows(const Json& rows) {
  if (!rows.is_array() || rows.empty()) {
    throw SchemaError("instance: \"mask_rows\" must be a non-empty array of strings");
  }
  const Index height = static_cast<Index>(rows.size());
  const Index width = static_cast<Index>(rows.front().get<std::string>().size());
  BinaryMask mask(height, width);
  for (Index r = 0; r < height; ++r) {
    const std::string row = rows.at(r).get<std::string>();
    if (static_cast<Index>(row.size()) != width) {
      throw SchemaError("instance: ragged \"mask_rows\"");
    }
    for (Index c = 0; c < width; ++c) {
      if (row[c] == '1') {
        mask.set(r, c);
      } else if (row[c] != '0') {
        throw SchemaError("instance: \"mask_rows\" may contain only '0' and '1'");
      }
    }
  }
  return mask;
}

BinaryMask mask_from_file(const std::filesystem::path& path) {
  const IdImage image = read_png(path);
  BinaryMask mask(image.height, image.width);
  for (Index r = 0; r < image.height; ++r) {
    for (Index c = 0; c < image.width; ++c) {
      const std::size_t k = static_cast<std::size_t>((r * image.width + c) * 3);
      mask.set(r, c, image.rgb[k] != 0 || image.rgb[k + 1] != 0 || image.rgb[k + 2] != 0);
    }
  }
  return mask;
}

InstancePrediction parse_instance(const Json& item, const std::filesystem::path& base_dir) {
  InstancePrediction inst;
  inst.category = require(item, "category_id", "instance").get<CategoryId>();
  inst.det_score = require(item, "score", "instance").get<double>();
  if (!(inst.det_score >= 0.0 && inst.det_score <= 1.0)) {
    throw SchemaError("instance: score outside [0, 1]");
  }
  if (item.contains("mask_rows")) {
    inst.mask = mask_from_rows(item.at("mask_rows"));
  } else if (item.contains("mask_file")) {
    inst.mask = mask_from_file(base_dir / item.at("mask_file").get<std::string>());
  } else {
    throw SchemaError("instance: needs \"mask_rows\" or \"mask_file\"");
  }
  if (inst.mask.empty()) {
    throw SchemaError("instance: empty mask");
  }
  return inst;
}

Json instance_json(const InstancePrediction& inst) {
  Json rows = Json::array();
  for (Index r = 0; r < inst.mask.height(); ++r) {
    std::string row(static_cast<std::size_t>(inst.mask.width()), '0');
    for (Index c = 0; c < inst.mask.width(); ++c) {
      if (inst.mask(r, c)) row[static_cast<std::size_t>(c)] = '1';
    }
    rows.push_back(std::move(row));
  }
  return Json{{"category_id", inst.category}, {"score", inst.det_score}, {"mask_rows", rows}};
}

void check_same_shapes(const std::vector<InstancePrediction>& list) {
  for (const auto& inst : list) {
    if (!inst.mask.same_shape(list.front().mask)) {
      throw SchemaError("instances: masks have different dimensions");
    }
  }
}

}  // namespace

IdImage encode_ids(const LabelMap& map) {
  IdImage out;
  out.width = map.width();
  out.height = map.height();
  out.rgb.resize(static_cast<std::size_t>(out.width * out.height * 3));
  const SegmentId* ids = map.ids().data();
  for (Index i = 0; i < map.ids().size(); ++i) {
    const SegmentId id = ids[i];
    if (id < 0 || id > kMaxEncodableId) {
      throw EncodingOverflowError("segment id " + std::to_string(id) + " does not fit in 24 bits");
    }
    out.rgb[3 * i] = static_cast<std::uint8_t>(id & 0xff);
    out.rgb[3 * i + 1] = static_cast<std::uint8_t>((id >> 8) & 0xff);
    out.rgb[3 * i + 2] = static_cast<std::uint8_t>((id >> 16) & 0xff);
  }
  return out;
}

LabelMap decode_ids(const IdImage& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw InvalidInputError("decode_ids: buffer does not match dimensions");
  }
  LabelMap map(image.height, image.width);
  SegmentId* ids = map.ids().data();
  for (Index i = 0; i < map.ids().size(); ++i) {
    ids[i] = static_cast<SegmentId>(image.rgb[3 * i]) +
             256 * static_cast<SegmentId>(image.rgb[3 * i + 1]) +
             65536 * static_cast<SegmentId>(image.rgb[3 * i + 2]);
  }
  return map;
}

CategoryTable parse_categories(const Json& doc) {
  return schema_guard("categories", [&] {
    if (!doc.is_array()) throw SchemaError("categories: expected an array");
    CategoryTable table;
    for (const Json& item : doc) {
      Category cat;
      cat.id = require(item, "id", "category").get<CategoryId>();
      cat.name = item.value("name", std::string{});
      const Json& isthing = require(item, "isthing", "category");
      cat.is_thing = isthing.is_boolean() ? isthing.get<bool>() : isthing.get<int>() != 0;
      if (!table.emplace(cat.id, cat).second) {
        throw SchemaError("categories: duplicate id " + std::to_string(cat.id));
      }
    }
    return table;
  });
}

Json categories_to_json(const CategoryTable& table) {
  Json out = Json::array();
  for (const auto& [id, cat] : table) {
    out.push_back(Json{{"id", id}, {"name", cat.name}, {"isthing", cat.is_thing ? 1 : 0}});
  }
  return out;
}

AnnotationMeta read_annotation_meta(const Json& doc) {
  return schema_guard("annotation", [&] {
    AnnotationMeta meta;
    meta.image_id = require(doc, "image_id", "annotation").get<std::int64_t>();
    meta.file_name = require(doc, "file_name", "annotation").get<std::string>();
    return meta;
  });
}

PanopticImage read_panoptic_annotation(const Json& doc, const IdImage& ids,
                                       const CategoryTable& categories) {
  PanopticImage out;
  out.labels = decode_ids(ids);
  std::unordered_map<SegmentId, Index> pixel_counts;
  for (const auto& [id, count] : id_histogram(out.labels)) {
    if (id != kVoidId) pixel_counts.emplace(id, count);
  }

  schema_guard("annotation", [&] {
    const Json& segments = require(doc, "segments_info", "annotation");
    if (!segments.is_array()) throw SchemaError("annotation: segments_info must be an array");
    for (const Json& item : segments) {
      SegmentInfo info;
      info.id = require(item, "id", "segment").get<SegmentId>();
      info.category = require(item, "category_id", "segment").get<CategoryId>();
      auto cat = categories.find(info.category);
      if (cat == categories.end()) {
        throw SchemaError("annotation: unknown category " + std::to_string(info.category));
      }
      info.is_thing = cat->second.is_thing;
      auto count = pixel_counts.find(info.id);
      if (count == pixel_counts.end()) {
        throw ConsistencyError("annotation lists segment " + std::to_string(info.id) +
                               " which has no pixels");
      }
      info.area = count->second;
      if (out.find(info.id) != nullptr) {
        throw ConsistencyError("annotation lists segment " + std::to_string(info.id) + " twice");
      }
      out.segments.push_back(info);
    }
    return 0;
  });

  if (out.segments.size() != pixel_counts.size()) {
    for (const auto& [id, count] : pixel_counts) {
      if (out.find(id) == nullptr) {
        throw ConsistencyError("pixel id " + std::to_string(id) + " missing from annotation");
      }
    }
  }
  return out;
}

std::pair<Json, IdImage> write_panoptic_annotation(const PanopticImage& image,
                                                   const AnnotationMeta& meta) {
  validate_partition(image);
  struct Box {
    Index r0 = std::numeric_limits<Index>::max(), c0 = std::numeric_limits<Index>::max();
    Index r1 = -1, c1 = -1;
  };
  std::unordered_map<SegmentId, Box> boxes;
  for (Index r = 0; r < image.height(); ++r) {
    for (Index c = 0; c < image.width(); ++c) {
      const SegmentId id = image.labels(r, c);
      if (id == kVoidId) continue;
      Box& b = boxes[id];
      b.r0 = std::min(b.r0, r);
      b.c0 = std::min(b.c0, c);
      b.r1 = std::max(b.r1, r);
      b.c1 = std::max(b.c1, c);
    }
  }

  Json segments = Json::array();
  for (const SegmentInfo& s : image.segments) {
    const Box& b = boxes.at(s.id);
    segments.push_back(Json{{"id", s.id},
                            {"category_id", s.category},
                            {"area", s.area},
                            {"iscrowd", 0},
                            {"bbox", {b.c0, b.r0, b.c1 - b.c0 + 1, b.r1 - b.r0 + 1}}});
  }
  Json doc{{"image_id", meta.image_id},
           {"file_name", meta.file_name},
           {"segments_info", std::move(segments)}};
  return {std::move(doc), encode_ids(image.labels)};
}

std::vector<InstancePrediction> parse_instances(const Json& doc,
                                                const std::filesystem::path& base_dir) {
  return schema_guard("instances", [&] {
    if (!doc.is_array()) throw SchemaError("instances: expected a JSON array");
    std::vector<InstancePrediction> out;
    for (const Json& item : doc) out.push_back(parse_instance(item, base_dir));
    check_same_shapes(out);
    return out;
  });
}

bool has_ranking_scores(const Json& doc) {
  return doc.is_array() && std::all_of(doc.begin(), doc.end(), [](const Json& item) {
           return item.is_object() && item.contains("ranking_score");
         });
}

std::vector<RankedInstance> parse_ranked_instances(const Json& doc,
                                                   const std::filesystem::path& base_dir) {
  std::vector<InstancePrediction> plain = parse_instances(doc, base_dir);
  if (!has_ranking_scores(doc)) {
    throw ContractError("instances: ranking mode needs a \"ranking_score\" on every instance");
  }
  return schema_guard("instances", [&] {
    std::vector<RankedInstance> out;
    for (std::size_t i = 0; i < plain.size(); ++i) {
      const double score = doc.at(i).at("ranking_score").get<double>();
      if (!(score >= 0.0 && score <= 1.0)) {
        throw SchemaError("instance: ranking_score outside [0, 1]");
      }
      out.push_back(RankedInstance{std::move(plain[i]), score});
    }
    return out;
  });
}

Json instances_to_json(std::span<const InstancePrediction> instances) {
  Json out = Json::array();
  for (const auto& inst : instances) out.push_back(instance_json(inst));
  return out;
}

Json ranked_instances_to_json(std::span<const RankedInstance> instances) {
  Json out = Json::array();
  for (const auto& ranked : instances) {
    Json item = instance_json(ranked.instance);
    item["ranking_score"] = ranked.ranking_score;
    out.push_back(std::move(item));
  }
  return out;
}

void StuffProbMap::normalize() {
  if (channels.empty()) return;
  ProbPlane total = ProbPlane::Zero(height(), width());
  for (const ProbPlane& ch : channels) total += ch;
  const double uniform = 1.0 / static_cast<double>(channels.size());
  for (ProbPlane& ch : channels) {
    ch = (total > 0.0).select(ch / total, ProbPlane::Constant(height(), width(), uniform));
  }
}

bool StuffProbMap::is_normalized(double tolerance) const {
  if (channels.empty()) return false;
  ProbPlane total = ProbPlane::Zero(height(), width());
  for (const ProbPlane& ch : channels) {
    if ((ch < 0.0).any() || (ch > 1.0).any()) return false;
    total += ch;
  }
  return ((total - 1.0).abs() <= tolerance).all();
}

bool operator==(const StuffProbMap& a, const StuffProbMap& b) {
  if (a.categories != b.categories || a.channels.size() != b.channels.size()) return false;
  for (std::size_t k = 0; k < a.channels.size(); ++k) {
    if (a.channels[k].rows() != b.channels[k].rows() ||
        a.channels[k].cols() != b.channels[k].cols() || !(a.channels[k] == b.channels[k]).all()) {
      return false;
    }
  }
  return true;
}

StuffProbMap stuff_from_logits(std::vector<CategoryId> categories,
                               const std::vector<ProbPlane>& logits) {
  if (logits.empty() || logits.size() != categories.size()) {
    throw InvalidInputError("stuff_from_logits: channel count must equal category count");
  }
  ProbPlane peak = logits.front();
  for (const ProbPlane& ch : logits) peak = peak.max(ch);
  StuffProbMap out;
  out.categories = std::move(categories);
  for (const ProbPlane& ch : logits) out.channels.push_back((ch - peak).exp());
  out.normalize();
  return out;
}

LabelMap stuff_argmax(const StuffProbMap& probs, std::span<const CategoryId> categories) {
  if (probs.channels.empty() || probs.channels.size() != categories.size()) {
    throw InvalidInputError("stuff_argmax: channel count must equal category count");
  }
  LabelMap out(probs.height(), probs.width());
  for (Index r = 0; r < out.height(); ++r) {
    for (Index c = 0; c < out.width(); ++c) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < categories.size(); ++k) {
        const double v = probs.channels[k](r, c);
        const double b = probs.channels[best](r, c);
        if (v > b || (v == b && categories[k] < categories[best])) best = k;
      }
      out(r, c) = categories[best];
    }
  }
  return out;
}

LabelMap stuff_argmax(const StuffProbMap& probs) {
  return stuff_argmax(probs, probs.categories);
}

void write_stuff_map(const std::filesystem::path& path, const StuffProbMap& probs) {
  if (probs.channels.size() != probs.categories.size()) {
    throw InvalidInputError("write_stuff_map: channel count must equal category count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kStuffMagic, sizeof(kStuffMagic));
  detail::put_le<std::uint32_t>(out, kStuffVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(probs.depth()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(probs.height()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(probs.width()));
  for (CategoryId cat : probs.categories) detail::put_le<std::int32_t>(out, cat);
  for (const ProbPlane& ch : probs.channels) {
    for (Index i = 0; i < ch.size(); ++i) detail::put_le<double>(out, ch.data()[i]);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

StuffProbMap read_stuff_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kStuffMagic)) {
    throw SchemaError(path.string() + ": not a stuff probability map");
  }
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kStuffVersion) {
    throw SchemaError(path.string() + ": unsupported stuff map version " + std::to_string(version));
  }
  const auto depth = detail::get_le<std::uint32_t>(in, "channel count");
  const auto height = detail::get_le<std::uint32_t>(in, "height");
  const auto width = detail::get_le<std::uint32_t>(in, "width");
  StuffProbMap out;
  for (std::uint32_t k = 0; k < depth; ++k) {
    out.categories.push_back(detail::get_le<std::int32_t>(in, "categories"));
  }
  for (std::uint32_t k = 0; k < depth; ++k) {
    ProbPlane ch(height, width);
    for (Index i = 0; i < ch.size(); ++i) ch.data()[i] = detail::get_le<double>(in, "probs");
    out.channels.push_back(std::move(ch));
  }
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace panfuse
