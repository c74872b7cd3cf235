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

#ifndef PANFUSE_MASK_HPP_
#define PANFUSE_MASK_HPP_

// Dense mask and label-map primitives. Grids are row-major Eigen arrays,
// rows = height, cols = width.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace panfuse {

using Index = Eigen::Index;
using SegmentId = std::int32_t;
using CategoryId = std::int32_t;

// Segment id 0 is void everywhere.
inline constexpr SegmentId kVoidId = 0;

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IdGrid = Eigen::Array<SegmentId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(Index height, Index width) : bits_(BoolGrid::Constant(height, width, false)) {}
  explicit BinaryMask(BoolGrid bits) : bits_(std::move(bits)) {}

  Index height() const { return bits_.rows(); }
  Index width() const { return bits_.cols(); }
  Index area() const { return bits_.count(); }
  bool empty() const { return area() == 0; }

  bool operator()(Index row, Index col) const { return bits_(row, col); }
  void set(Index row, Index col, bool value = true) { bits_(row, col) = value; }

  const BoolGrid& bits() const { return bits_; }
  BoolGrid& bits() { return bits_; }

  bool same_shape(const BinaryMask& other) const {
    return height() == other.height() && width() == other.width();
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.same_shape(b) && (a.bits_ == b.bits_).all();
  }

 private:
  BoolGrid bits_;
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(Index height, Index width, SegmentId fill = kVoidId)
      : ids_(IdGrid::Constant(height, width, fill)) {}
  explicit LabelMap(IdGrid ids) : ids_(std::move(ids)) {}

  Index height() const { return ids_.rows(); }
  Index width() const { return ids_.cols(); }

  SegmentId operator()(Index row, Index col) const { return ids_(row, col); }
  SegmentId& operator()(Index row, Index col) { return ids_(row, col); }

  const IdGrid& ids() const { return ids_; }
  IdGrid& ids() { return ids_; }

  // Writes `id` on every set pixel of `mask`.
  void paint(const BinaryMask& mask, SegmentId id);

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.height() == b.height() && a.width() == b.width() && (a.ids_ == b.ids_).all();
  }

 private:
  IdGrid ids_;
};

struct SegmentInfo {
  SegmentId id = kVoidId;
  CategoryId category = 0;
  bool is_thing = false;
  Index area = 0;

  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

struct PanopticImage {
  LabelMap labels;
  std::vector<SegmentInfo> segments;

  Index height() const { return labels.height(); }
  Index width() const { return labels.width(); }
  const SegmentInfo* find(SegmentId id) const;

  friend bool operator==(const PanopticImage&, const PanopticImage&) = default;
};

enum class Connectivity { kFour = 4, kEight = 8 };

// |a ∩ b| / |a ∪ b|, 0 for an empty union. Throws InvalidInputError on shape
// mismatch.
double iou(const BinaryMask& a, const BinaryMask& b);

// Per-pixel component index (-1 off-mask) plus the component count. Components
// are numbered in raster order of their first pixel.
struct ComponentLabels {
  Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> index;
  std::int32_t count = 0;
  std::vector<Index> areas;
};

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity);

std::vector<BinaryMask> connected_components(const BinaryMask& mask,
                                             Connectivity connectivity = Connectivity::kFour);

BinaryMask mask_from_label(const LabelMap& map, SegmentId id);

// Checks the partition invariant: ids positive and unique, every pixel id
// listed, recorded areas equal pixel counts, areas positive. Throws
// ConsistencyError describing the first violation.
void validate_partition(const PanopticImage& image);
bool is_valid_partition(const PanopticImage& image);

// Pixel count per id, including void under key 0.
std::vector<std::pair<SegmentId, Index>> id_histogram(const LabelMap& map);

}  // namespace panfuse

#endif  // PANFUSE_MASK_HPP_
