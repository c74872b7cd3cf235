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

#include "panfuse/mask.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>

#include "panfuse/errors.hpp"

namespace panfuse {

void LabelMap::paint(const BinaryMask& mask, SegmentId id) {
  if (mask.height() != height() || mask.width() != width()) {
    throw InvalidInputError("paint: mask shape does not match label map");
  }
  ids_ = mask.bits().select(IdGrid::Constant(height(), width(), id), ids_);
}

const SegmentInfo* PanopticImage::find(SegmentId id) const {
  auto it = std::find_if(segments.begin(), segments.end(),
                         [id](const SegmentInfo& s) { return s.id == id; });
  return it == segments.end() ? nullptr : &*it;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) {
    throw InvalidInputError("iou: masks have different dimensions");
  }
  const Index uni = (a.bits() || b.bits()).count();
  if (uni == 0) return 0.0;
  const Index inter = (a.bits() && b.bits()).count();
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity) {
  const Index h = mask.height();
  const Index w = mask.width();
  ComponentLabels out;
  out.index.setConstant(h, w, -1);

  std::vector<std::pair<Index, Index>> stack;
  const bool diag = connectivity == Connectivity::kEight;
  for (Index r0 = 0; r0 < h; ++r0) {
    for (Index c0 = 0; c0 < w; ++c0) {
      if (!mask(r0, c0) || out.index(r0, c0) >= 0) continue;
      const std::int32_t label = out.count++;
      Index area = 0;
      out.index(r0, c0) = label;
      stack.emplace_back(r0, c0);
      while (!stack.empty()) {
        auto [r, c] = stack.back();
        stack.pop_back();
        ++area;
        for (Index dr = -1; dr <= 1; ++dr) {
          for (Index dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (!diag && dr != 0 && dc != 0) continue;
            const Index rr = r + dr;
            const Index cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            if (!mask(rr, cc) || out.index(rr, cc) >= 0) continue;
            out.index(rr, cc) = label;
            stack.emplace_back(rr, cc);
          }
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const ComponentLabels labels = label_components(mask, connectivity);
  std::vector<BinaryMask> out;
  out.reserve(static_cast<std::size_t>(labels.count));
  for (std::int32_t k = 0; k < labels.count; ++k) {
    out.emplace_back(BoolGrid(labels.index == k));
  }
  return out;
}

BinaryMask mask_from_label(const LabelMap& map, SegmentId id) {
  return BinaryMask(BoolGrid(map.ids() == id));
}

std::vector<std::pair<SegmentId, Index>> id_histogram(const LabelMap& map) {
  std::map<SegmentId, Index> counts;
  const SegmentId* data = map.ids().data();
  for (Index i = 0; i < map.ids().size(); ++i) ++counts[data[i]];
  return {counts.begin(), counts.end()};
}

void validate_partition(const PanopticImage& image) {
  std::unordered_map<SegmentId, Index> listed;
  for (const SegmentInfo& s : image.segments) {
    if (s.id <= kVoidId) {
      throw ConsistencyError("segment id " + std::to_string(s.id) + " is not positive");
    }
    if (s.area <= 0) {
      throw ConsistencyError("segment " + std::to_string(s.id) + " has non-positive area");
    }
    if (!listed.emplace(s.id, s.area).second) {
      throw ConsistencyError("segment id " + std::to_string(s.id) + " listed twice");
    }
  }
  Index covered = 0;
  Index void_area = 0;
  std::size_t seen = 0;
  for (const auto& [id, count] : id_histogram(image.labels)) {
    if (id == kVoidId) {
      void_area = count;
      continue;
    }
    auto it = listed.find(id);
    if (it == listed.end()) {
      throw ConsistencyError("pixel id " + std::to_string(id) + " missing from segment table");
    }
    if (it->second != count) {
      throw ConsistencyError("segment " + std::to_string(id) + " area " +
                             std::to_string(it->second) + " but " + std::to_string(count) +
                             " pixels");
    }
    covered += count;
    ++seen;
  }
  if (seen != listed.size()) {
    throw ConsistencyError("segment table lists ids absent from the label map");
  }
  if (covered + void_area != image.height() * image.width()) {
    throw ConsistencyError("segment areas do not partition the image");
  }
}

bool is_valid_partition(const PanopticImage& image) {
  try {
    validate_partition(image);
    return true;
  } catch (const ConsistencyError&) {
    return false;
  }
}

}  // namespace panfuse
