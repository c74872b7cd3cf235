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

#ifndef PANFUSE_PQ_HPP_
#define PANFUSE_PQ_HPP_

// Segment matching and Panoptic Quality.
//
// A predicted and a ground-truth segment match when they share a category and
// their IOU exceeds 0.5; the threshold makes the matching unique. Ground-truth
// void pixels are removed from the union, and an unmatched prediction lying
// mostly (> 50%) on ground-truth void is dropped instead of counted as FP.
//
//   SQ = sum(IOU over TP) / |TP|
//   DQ = |TP| / (|TP| + |FP| / 2 + |FN| / 2)
//   PQ = SQ * DQ

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "panfuse/format.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

inline constexpr double kMatchThreshold = 0.5;

struct TpPair {
  SegmentId pred = kVoidId;
  SegmentId gt = kVoidId;
  double iou = 0.0;

  friend bool operator==(const TpPair&, const TpPair&) = default;
};

struct CategoryMatches {
  bool is_thing = false;
  std::vector<TpPair> tp;
  std::vector<SegmentId> fp;
  std::vector<SegmentId> fn;

  friend bool operator==(const CategoryMatches&, const CategoryMatches&) = default;
};

struct MatchResult {
  std::map<CategoryId, CategoryMatches> categories;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

MatchResult match_segments(const PanopticImage& pred, const PanopticImage& gt);

// Order-independent accumulation of match counts. IOUs are kept per category
// and summed in sorted order, so any merge order yields bit-identical reports.
class PqAccumulator {
 public:
  struct Totals {
    bool is_thing = false;
    std::vector<double> ious;
    std::int64_t n_fp = 0;
    std::int64_t n_fn = 0;
  };

  void add(const MatchResult& result);
  void merge(const PqAccumulator& other);
  const std::map<CategoryId, Totals>& totals() const { return totals_; }

 private:
  std::map<CategoryId, Totals> totals_;
};

struct CategoryReport {
  CategoryId category = 0;
  bool is_thing = false;
  double pq = 0.0;
  double sq = 0.0;
  double dq = 0.0;
  std::int64_t n_tp = 0;
  std::int64_t n_fp = 0;
  std::int64_t n_fn = 0;

  friend bool operator==(const CategoryReport&, const CategoryReport&) = default;
};

struct AggregateReport {
  double pq = 0.0;
  double sq = 0.0;
  double dq = 0.0;
  std::int64_t n_categories = 0;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

// Aggregates are unweighted means over categories with at least one GT
// segment; per-category rows cover every category seen in either side.
struct PqReport {
  std::vector<CategoryReport> per_category;
  AggregateReport all;
  AggregateReport things;
  AggregateReport stuff;

  friend bool operator==(const PqReport&, const PqReport&) = default;
};

PqReport compute_pq(const PqAccumulator& acc);
PqReport compute_pq(std::span<const MatchResult> matches);

using Dataset = std::map<std::string, PanopticImage>;

struct EvalOptions {
  unsigned jobs = 1;
  std::function<void(const std::string&)> warn;
};

// GT images without a prediction are scored against an all-void prediction.
PqReport evaluate_dataset(const Dataset& pred, const Dataset& gt, const EvalOptions& options = {});

// Values rounded to 4 decimals.
Json report_to_json(const PqReport& report);
// PQ/SQ/DQ in percent for All, Things and Stuff.
std::string report_table(const PqReport& report);

}  // namespace panfuse

#endif  // PANFUSE_PQ_HPP_
