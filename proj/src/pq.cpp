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

#include "panfuse/pq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "panfuse/errors.hpp"
#include "panfuse/parallel.hpp"

namespace panfuse {

namespace {

std::uint64_t pair_key(SegmentId pred, SegmentId gt) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(pred)) << 32) |
         static_cast<std::uint32_t>(gt);
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

AggregateReport average(const std::vector<const CategoryReport*>& rows) {
  AggregateReport agg;
  agg.n_categories = static_cast<std::int64_t>(rows.size());
  if (rows.empty()) return agg;
  for (const CategoryReport* row : rows) {
    agg.pq += row->pq;
    agg.sq += row->sq;
    agg.dq += row->dq;
  }
  const double n = static_cast<double>(rows.size());
  agg.pq /= n;
  agg.sq /= n;
  agg.dq /= n;
  return agg;
}

Json aggregate_json(const AggregateReport& agg) {
  return Json{{"pq", round4(agg.pq)},
              {"sq", round4(agg.sq)},
              {"dq", round4(agg.dq)},
              {"n", agg.n_categories}};
}

}  // namespace

MatchResult match_segments(const PanopticImage& pred, const PanopticImage& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw InvalidInputError("match_segments: prediction and ground truth differ in size");
  }
  validate_partition(pred);
  validate_partition(gt);

  std::unordered_map<std::uint64_t, Index> overlap;
  const SegmentId* p = pred.labels.ids().data();
  const SegmentId* g = gt.labels.ids().data();
  for (Index i = 0; i < pred.labels.ids().size(); ++i) ++overlap[pair_key(p[i], g[i])];
  auto overlap_of = [&](SegmentId ps, SegmentId gs) -> Index {
    auto it = overlap.find(pair_key(ps, gs));
    return it == overlap.end() ? 0 : it->second;
  };

  std::vector<SegmentInfo> pred_segs = pred.segments;
  std::vector<SegmentInfo> gt_segs = gt.segments;
  auto by_id = [](const SegmentInfo& a, const SegmentInfo& b) { return a.id < b.id; };
  std::sort(pred_segs.begin(), pred_segs.end(), by_id);
  std::sort(gt_segs.begin(), gt_segs.end(), by_id);

  MatchResult result;
  std::unordered_map<SegmentId, bool> pred_matched;
  for (const SegmentInfo& gs : gt_segs) {
    CategoryMatches& cat = result.categories[gs.category];
    cat.is_thing = gs.is_thing;
    bool matched = false;
    for (const SegmentInfo& ps : pred_segs) {
      if (ps.category != gs.category) continue;
      const Index inter = overlap_of(ps.id, gs.id);
      if (inter == 0) continue;
      const Index uni = ps.area + gs.area - inter - overlap_of(ps.id, kVoidId);
      const double value = static_cast<double>(inter) / static_cast<double>(uni);
      if (value > kMatchThreshold) {
        cat.tp.push_back(TpPair{ps.id, gs.id, value});
        pred_matched[ps.id] = true;
        matched = true;
        break;
      }
    }
    if (!matched) cat.fn.push_back(gs.id);
  }
  for (const SegmentInfo& ps : pred_segs) {
    if (pred_matched.count(ps.id) != 0) continue;
    const Index on_void = overlap_of(ps.id, kVoidId);
    if (static_cast<double>(on_void) / static_cast<double>(ps.area) > kMatchThreshold) continue;
    auto [it, inserted] = result.categories.try_emplace(ps.category);
    if (inserted) it->second.is_thing = ps.is_thing;
    it->second.fp.push_back(ps.id);
  }
  return result;
}

void PqAccumulator::add(const MatchResult& result) {
  for (const auto& [category, matches] : result.categories) {
    auto [it, inserted] = totals_.try_emplace(category);
    Totals& t = it->second;
    if (inserted || !matches.tp.empty() || !matches.fn.empty()) t.is_thing = matches.is_thing;
    for (const TpPair& pair : matches.tp) t.ious.push_back(pair.iou);
    t.n_fp += static_cast<std::int64_t>(matches.fp.size());
    t.n_fn += static_cast<std::int64_t>(matches.fn.size());
  }
}

void PqAccumulator::merge(const PqAccumulator& other) {
  for (const auto& [category, src] : other.totals_) {
    auto [it, inserted] = totals_.try_emplace(category);
    Totals& t = it->second;
    if (inserted || !src.ious.empty() || src.n_fn > 0) t.is_thing = src.is_thing;
    t.ious.insert(t.ious.end(), src.ious.begin(), src.ious.end());
    t.n_fp += src.n_fp;
    t.n_fn += src.n_fn;
  }
}

PqReport compute_pq(const PqAccumulator& acc) {
  PqReport report;
  for (const auto& [category, t] : acc.totals()) {
    CategoryReport row;
    row.category = category;
    row.is_thing = t.is_thing;
    row.n_tp = static_cast<std::int64_t>(t.ious.size());
    row.n_fp = t.n_fp;
    row.n_fn = t.n_fn;
    std::vector<double> sorted = t.ious;
    std::sort(sorted.begin(), sorted.end());
    double iou_sum = 0.0;
    for (double v : sorted) iou_sum += v;
    if (row.n_tp > 0) row.sq = iou_sum / static_cast<double>(row.n_tp);
    const double denom = static_cast<double>(row.n_tp) + 0.5 * static_cast<double>(row.n_fp) +
                         0.5 * static_cast<double>(row.n_fn);
    if (denom > 0.0) row.dq = static_cast<double>(row.n_tp) / denom;
    row.pq = row.sq * row.dq;
    report.per_category.push_back(row);
  }

  std::vector<const CategoryReport*> all, things, stuff;
  for (const CategoryReport& row : report.per_category) {
    if (row.n_tp + row.n_fn == 0) continue;
    all.push_back(&row);
    (row.is_thing ? things : stuff).push_back(&row);
  }
  report.all = average(all);
  report.things = average(things);
  report.stuff = average(stuff);
  return report;
}

PqReport compute_pq(std::span<const MatchResult> matches) {
  PqAccumulator acc;
  for (const MatchResult& m : matches) acc.add(m);
  return compute_pq(acc);
}

PqReport evaluate_dataset(const Dataset& pred, const Dataset& gt, const EvalOptions& options) {
  auto warn = [&](const std::string& message) {
    if (options.warn) {
      options.warn(message);
    } else {
      std::cerr << "warning: " << message << '\n';
    }
  };
  for (const auto& [key, image] : pred) {
    if (gt.count(key) == 0) warn("prediction " + key + " has no ground truth; ignored");
  }

  std::vector<const std::string*> keys;
  for (const auto& [key, image] : gt) {
    keys.push_back(&key);
    if (pred.count(key) == 0) warn("no prediction for " + key + "; scoring it as empty");
  }

  std::vector<MatchResult> results(keys.size());
  parallel_for(keys.size(), options.jobs, [&](std::size_t i) {
    const PanopticImage& truth = gt.at(*keys[i]);
    auto it = pred.find(*keys[i]);
    if (it != pred.end()) {
      results[i] = match_segments(it->second, truth);
    } else {
      PanopticImage empty;
      empty.labels = LabelMap(truth.height(), truth.width());
      results[i] = match_segments(empty, truth);
    }
  });
  return compute_pq(results);
}

Json report_to_json(const PqReport& report) {
  Json rows = Json::array();
  for (const CategoryReport& row : report.per_category) {
    rows.push_back(Json{{"category_id", row.category},
                        {"isthing", row.is_thing ? 1 : 0},
                        {"pq", round4(row.pq)},
                        {"sq", round4(row.sq)},
                        {"dq", round4(row.dq)},
                        {"tp", row.n_tp},
                        {"fp", row.n_fp},
                        {"fn", row.n_fn}});
  }
  return Json{{"all", aggregate_json(report.all)},
              {"things", aggregate_json(report.things)},
              {"stuff", aggregate_json(report.stuff)},
              {"per_category", std::move(rows)}};
}

std::string report_table(const PqReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s| %9s %9s %9s %5s\n", "", "PQ", "SQ", "DQ", "N");
  out << line;
  out << std::string(46, '-') << '\n';
  auto emit = [&](const char* name, const AggregateReport& agg) {
    std::snprintf(line, sizeof(line), "%-8s| %9.4f %9.4f %9.4f %5lld\n", name, 100.0 * agg.pq,
                  100.0 * agg.sq, 100.0 * agg.dq, static_cast<long long>(agg.n_categories));
    out << line;
  };
  emit("All", report.all);
  emit("Things", report.things);
  emit("Stuff", report.stuff);
  return out.str();
}

}  // namespace panfuse
