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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "panfuse/cli.hpp"
#include "panfuse/corpus.hpp"
#include "panfuse/fusion.hpp"
#include "panfuse/pq.hpp"
#include "panfuse/ranking.hpp"
#include "panfuse/synth.hpp"
#include "panfuse/training.hpp"

using namespace panfuse;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Stuff area filter for 64x64 scenes: 4900 px of a 640x480 image is about
// 1.6% of its area, which is 64 px here.
constexpr Index kSceneStuffArea = 64;

int failures = 0;
std::vector<PqReport> all_reports;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != kExitOk) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

FusionParams scene_params(FusionMode mode) {
  FusionParams p;
  p.min_stuff_area = kSceneStuffArea;
  p.mode = mode;
  return p;
}

bool visible(const PanopticImage& merged, const InstancePrediction& inst) {
  for (const SegmentInfo& s : merged.segments) {
    if (!s.is_thing || s.category != inst.category) continue;
    const BoolGrid mine = merged.labels.ids() == s.id;
    if ((mine && inst.mask.bits()).count() * 2 > inst.mask.area()) return true;
  }
  return false;
}

PqReport dataset_pq(const std::vector<PanopticImage>& pred, const std::vector<Scene>& scenes) {
  std::vector<MatchResult> ms;
  for (std::size_t i = 0; i < scenes.size(); ++i) ms.push_back(match_segments(pred[i], scenes[i].gt));
  PqReport r = compute_pq(ms);
  all_reports.push_back(r);
  return r;
}

void ac1_metric_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20261014);
  std::uniform_int_distribution<Index> side(2, 16);
  int count_mismatch = 0;
  double worst = 0.0;
  oracle::Counts total_oracle;
  std::vector<MatchResult> total_lib;
  for (int t = 0; t < 500; ++t) {
    const Index h = side(rng), w = side(rng);
    const PanopticImage gt = oracle::random_partition(rng, h, w, 5, 4);
    const PanopticImage pred = oracle::random_partition(rng, h, w, 5, 4);
    const MatchResult lib = match_segments(pred, gt);
    const oracle::Counts want = oracle::brute_force_match(pred, gt);
    oracle::accumulate(total_oracle, want);
    total_lib.push_back(lib);

    std::map<CategoryId, std::tuple<std::size_t, int, int>> a, b;
    for (const auto& [cat, m] : lib.categories) {
      if (!m.tp.empty() || !m.fp.empty() || !m.fn.empty()) {
        a[cat] = {m.tp.size(), static_cast<int>(m.fp.size()), static_cast<int>(m.fn.size())};
      }
    }
    for (const auto& [cat, c] : want) {
      if (!c.ious.empty() || c.fp > 0 || c.fn > 0) b[cat] = {c.ious.size(), c.fp, c.fn};
    }
    if (a != b) ++count_mismatch;

    const std::vector<MatchResult> single{lib};
    const PqReport r = compute_pq(single);
    all_reports.push_back(r);
    const oracle::Pq o = oracle::mean_pq(want);
    worst = std::max({worst, std::abs(r.all.pq - o.pq), std::abs(r.all.sq - o.sq), std::abs(r.all.dq - o.dq)});
  }
  const PqReport agg = compute_pq(total_lib);
  all_reports.push_back(agg);
  const oracle::Pq o = oracle::mean_pq(total_oracle);
  worst = std::max(worst, std::abs(agg.all.pq - o.pq));
  const double elapsed = seconds_since(start);
  report("AC1", count_mismatch == 0 && worst < 1e-9 && elapsed < 10.0,
         fmt("metric oracle: 500 scenes, %d TP/FP/FN mismatches, max |dPQ| %.2e (tol 1e-9), %.2f s (limit 10 s)",
             count_mismatch, worst, elapsed));
}

void ac3_fusion_direction() {
  const auto start = Clock::now();
  SceneSpec spec;
  spec.score_bias = 1.0;
  spec.seed = 303;
  const std::vector<Scene> scenes = generate_corpus(spec, 200);
  std::vector<PanopticImage> heuristic, ranking;
  int planted = 0, shown = 0;
  for (const Scene& s : scenes) {
    const LabelMap stuff = stuff_argmax(s.stuff);
    heuristic.push_back(merge(s.preds, stuff, scene_params(FusionMode::kHeuristic)));
    ranking.push_back(merge(oracle_ranking_scores(s.gt, s.preds), stuff, scene_params(FusionMode::kRanking)));
    for (const OcclusionPair& p : s.pairs) {
      ++planted;
      shown += visible(ranking.back(), s.preds[p.occludee]);
    }
  }
  const double pq_h = dataset_pq(heuristic, scenes).all.pq;
  const double pq_r = dataset_pq(ranking, scenes).all.pq;
  const double elapsed = seconds_since(start);
  report("AC3", pq_r > pq_h && shown == planted && elapsed < 30.0,
         fmt("fusion direction: 200 scenes, PQ heuristic %.4f < ranking(oracle) %.4f, occludees visible %d/%d, "
             "%.2f s (limit 30 s)",
             pq_h, pq_r, shown, planted, elapsed));
}

void ac4_learned_srm() {
  const auto start = Clock::now();
  SceneSpec spec;
  spec.seed = 404;
  const std::vector<Scene> train = generate_corpus(spec, 100);
  spec.seed = 405;
  const std::vector<Scene> held = generate_corpus(spec, 50);
  const ThingChannels channels = ThingChannels::from_table(synth_categories());
  std::vector<SrmSample> samples;
  for (const Scene& s : train) samples.push_back(make_srm_sample(s.gt, s.preds, channels));
  TrainConfig cfg = TrainConfig::desk();
  cfg.shape = ConvShape::k1x7_7x1;
  const TrainResult result = train_srm(samples, cfg);
  const double ratio = result.final_mean_loss / result.initial_mean_loss;

  int pairs = 0, ordered = 0;
  std::vector<PanopticImage> learned, detection;
  for (const Scene& s : held) {
    const auto ranked = rank_instances(s.preds, result.weights, channels);
    for (const OcclusionPair& p : s.pairs) {
      ++pairs;
      ordered += ranked[p.occludee].ranking_score > ranked[p.occluder].ranking_score;
    }
    const LabelMap stuff = stuff_argmax(s.stuff);
    learned.push_back(merge(ranked, stuff, scene_params(FusionMode::kRanking)));
    detection.push_back(merge(s.preds, stuff, scene_params(FusionMode::kHeuristic)));
  }
  const double pq_l = dataset_pq(learned, held).all.pq;
  const double pq_d = dataset_pq(detection, held).all.pq;
  const double order_rate = static_cast<double>(ordered) / static_cast<double>(pairs);
  const double elapsed = seconds_since(start);
  report("AC4", ratio <= 0.5 && order_rate >= 0.9 && pq_l >= pq_d && elapsed < 300.0,
         fmt("learned SRM (1x7+7x1, %lld iters): loss %.4f -> %.4f (ratio %.4f, limit 0.5), held-out ordering "
             "%d/%d = %.3f (min 0.9), PQ learned %.4f >= detection %.4f, %.1f s (limit 300 s)",
             static_cast<long long>(cfg.total_iters), result.initial_mean_loss, result.final_mean_loss, ratio,
             ordered, pairs, order_rate, pq_l, pq_d, elapsed));
}

Tensor3<double> random_tensor(std::mt19937_64& rng, Index c, Index h, Index w) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor3<double> t(static_cast<std::size_t>(c), Plane<double>(h, w));
  for (auto& p : t) p = p.unaryExpr([&](double) { return n(rng); });
  return t;
}

Eigen::VectorXd flat(const Tensor3<double>& t) {
  Eigen::VectorXd v(static_cast<Index>(t.size()) * t[0].size());
  Index k = 0;
  for (const auto& p : t) {
    for (Index i = 0; i < p.size(); ++i) v(k++) = p.data()[i];
  }
  return v;
}

Tensor3<double> unflat(const Eigen::VectorXd& v, Index c, Index h, Index w) {
  Tensor3<double> t(static_cast<std::size_t>(c), Plane<double>(h, w));
  Index k = 0;
  for (auto& p : t) {
    for (Index i = 0; i < p.size(); ++i) p.data()[i] = v(k++);
  }
  return t;
}

void ac5_gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index c = 2 + t % 3;
    const ConvShape shape = static_cast<ConvShape>(t % 3);
    const Index h = 6, w = 6;
    ConvSpec<double> spec = ConvSpec<double>::random(shape, c, rng());
    std::normal_distribution<double> n(0.0, 0.3);
    for (Index k = 0; k < c; ++k) spec.bias(k) = n(rng);
    const Tensor3<double> x = random_tensor(rng, c, h, w);
    std::uniform_int_distribution<SegmentId> lab(0, static_cast<SegmentId>(c - 1));
    LabelMap labels(h, w);
    for (Index i = 0; i < labels.ids().size(); ++i) labels.ids().data()[i] = lab(rng);
    BinaryMask sup(h, w);
    std::bernoulli_distribution b(0.6);
    for (Index r = 0; r < h; ++r) {
      for (Index q = 0; q < w; ++q) sup.set(r, q, b(rng));
    }
    sup.set(0, 0);

    // Parameters through conv, normalization and CE.
    const ScoreMap<double> scores = forward(x, spec);
    const LossResult<double> loss = srm_loss(scores, labels, sup);
    const ConvGradients<double> g = conv_backward(x, spec, loss.grad_logits);
    auto by_params = [&](const Eigen::VectorXd& v) {
      ConvSpec<double> s = spec;
      assign_parameters(s, v);
      return srm_loss(forward(x, s), labels, sup).loss;
    };
    worst = std::max(worst, oracle::max_relative_error(
                                flatten_gradients(g), oracle::numeric_gradient(by_params, flatten_parameters(spec))));
    // Input gradient.
    auto by_input = [&](const Eigen::VectorXd& v) { return srm_loss(forward(unflat(v, c, h, w), spec), labels, sup).loss; };
    worst = std::max(worst, oracle::max_relative_error(flat(g.input), oracle::numeric_gradient(by_input, flat(x))));
    // Logit gradient of normalization + CE alone.
    auto by_logits = [&](const Eigen::VectorXd& v) {
      ScoreMap<double> s;
      s.logits = unflat(v, c, h, w);
      s.probs = softmax_channels(s.logits);
      return srm_loss(s, labels, sup).loss;
    };
    worst = std::max(worst, oracle::max_relative_error(flat(loss.grad_logits),
                                                       oracle::numeric_gradient(by_logits, flat(scores.logits))));
  }
  const double elapsed = seconds_since(start);
  report("AC5", worst < 1e-4,
         fmt("gradients: 100 trials (C=2..4, 6x6, all three shapes), max relative error %.2e (tol 1e-4), %.2f s",
             worst, elapsed));
}

void ac6_separable() {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index c = 1 + t % 4;
    ConvSpec<double> spec = ConvSpec<double>::random(ConvShape::k1x7_7x1, c, rng());
    std::normal_distribution<double> n(0.0, 0.5);
    for (Index k = 0; k < c; ++k) spec.bias(k) = n(rng);
    const Tensor3<double> x = random_tensor(rng, c, 3 + t % 9, 3 + (t * 7) % 11);
    const auto want = oracle::dense_conv(x, oracle::separable_to_dense(spec), spec.bias);
    const auto got = conv_forward(x, spec);
    for (Index k = 0; k < c; ++k) worst = std::max(worst, (got[k] - want[k]).cwiseAbs().maxCoeff());
  }
  report("AC6", worst < 1e-10,
         fmt("separable conv vs dense 7x7 rank-1 kernel: 100 inputs, max |diff| %.2e (tol 1e-10)", worst));
}

void ac7_roundtrips(const fs::path& root) {
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<SegmentId> id(0, kMaxEncodableId);
  std::uniform_int_distribution<Index> side(1, 32);
  int id_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    LabelMap map(side(rng), side(rng));
    for (Index i = 0; i < map.ids().size(); ++i) map.ids().data()[i] = id(rng);
    if (!(decode_ids(encode_ids(map)) == map)) ++id_failures;
  }
  SceneSpec spec;
  spec.noise = 0.1;
  spec.seed = 708;
  const std::vector<Scene> scenes = generate_corpus(spec, 100);
  const fs::path dir = root / "ac7";
  write_corpus(dir, scenes, spec);
  const std::vector<CorpusScene> back = read_corpus(dir);
  int ann_failures = back.size() == scenes.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(back.size(), scenes.size()); ++i) {
    if (!(back[i].scene == scenes[i])) ++ann_failures;
    const auto [doc, ids] = write_panoptic_annotation(scenes[i].gt, {static_cast<std::int64_t>(i), "x.png"});
    if (!(read_panoptic_annotation(doc, ids, synth_categories()) == scenes[i].gt)) ++ann_failures;
  }
  report("AC7", id_failures == 0 && ann_failures == 0,
         fmt("format roundtrips: %d/1000 id-map failures, %d/100 synth scene failures (files + in memory)",
             id_failures, ann_failures));
}

void ac8_schedule() {
  const TrainConfig cfg = TrainConfig::full();
  const double a = lr_at(0, cfg), b = lr_at(2000, cfg), c = lr_at(60000, cfg), d = lr_at(80000, cfg);
  report("AC8", a == 0.002 && b == 0.02 && c == 0.002 && d == 0.0002,
         fmt("full schedule: lr@0 %.17g, lr@2000 %.17g, lr@60000 %.17g, lr@80000 %.17g (exact)", a, b, c, d));
}

void ac9_determinism(const fs::path& root) {
  const fs::path dir = root / "ac9";
  bool ok = cli({"synth", "--out", (dir / "corpus").string(), "--seed", "909", "--count", "40"}) == kExitOk;
  const std::string inputs = (dir / "corpus" / "inputs").string();
  const std::string gt = (dir / "corpus" / "gt").string();
  for (const std::string jobs : {"1", "8"}) {
    ok = ok && cli({"merge", "--instances", inputs, "--out", (dir / ("det" + jobs)).string(), "--min-stuff-area",
                    "64", "--jobs", jobs}) == kExitOk;
    ok = ok && cli({"merge", "--instances", inputs, "--instances-suffix", kOracleSuffix, "--mode", "ranking",
                    "--out", (dir / ("orc" + jobs)).string(), "--min-stuff-area", "64", "--jobs", jobs}) == kExitOk;
    ok = ok && cli({"eval", "--pred", (dir / ("det" + jobs)).string(), "--gt", gt, "--out",
                    (dir / ("eval" + jobs + ".json")).string(), "--jobs", jobs}) == kExitOk;
  }
  const bool merge_equal = ok && tree(dir / "det1") == tree(dir / "det8") && tree(dir / "orc1") == tree(dir / "orc8");
  const bool eval_equal = ok && slurp(dir / "eval1.json") == slurp(dir / "eval8.json");
  for (const char* name : {"w1.srmw", "w2.srmw"}) {
    ok = ok && cli({"srm", "train", "--corpus", (dir / "corpus").string(), "--seed", "9", "--weights-out",
                    (dir / name).string()}) == kExitOk;
  }
  const bool train_equal = ok && slurp(dir / "w1.srmw") == slurp(dir / "w2.srmw") && !slurp(dir / "w1.srmw").empty();
  report("AC9", ok && merge_equal && eval_equal && train_equal,
         fmt("determinism: merge --jobs 8 == --jobs 1 %s, eval %s, seeded training weight files %s",
             merge_equal ? "byte-identical" : "DIFFER", eval_equal ? "byte-identical" : "DIFFER",
             train_equal ? "byte-identical" : "DIFFER"));
}

void ac10_constants() {
  const FusionParams defaults;
  BinaryMask corner(70, 70);
  corner.set(0, 0);
  const std::vector<InstancePrediction> one{{1, 0.9, corner}};
  const PanopticImage dropped = merge(one, LabelMap(70, 70, 5), defaults);
  const bool drops_4899 = (dropped.labels.ids() == kVoidId).count() == 4899;

  BinaryMask row(71, 70);
  row.bits().topRows(1) = true;
  const std::vector<InstancePrediction> one_row{{1, 0.9, row}};
  const PanopticImage kept = merge(one_row, LabelMap(71, 70, 5), defaults);
  Index stuff_area = 0;
  for (const SegmentInfo& s : kept.segments) stuff_area += s.is_thing ? 0 : s.area;
  const bool keeps_4900 = stuff_area == 4900;

  std::vector<InstancePrediction> many;
  for (int k = 0; k < 150; ++k) {
    BinaryMask m(10, 15);
    m.set(k / 15, k % 15);
    many.push_back({1, (k + 1) / 151.0, m});
  }
  const PanopticImage truncated = merge(many, LabelMap(10, 15, 5), defaults);
  std::size_t things = 0;
  bool lowest_gone = true;
  for (const SegmentInfo& s : truncated.segments) things += s.is_thing;
  for (int k = 0; k < 50; ++k) lowest_gone = lowest_gone && truncated.labels(k / 15, k % 15) == kVoidId;
  report("AC10", drops_4899 && keeps_4900 && things == 100 && lowest_gone,
         fmt("inference constants: 4899-px stuff region %s, 4900-px region %s, %zu of 150 instances kept (want 100)",
             drops_4899 ? "voided" : "KEPT", keeps_4900 ? "kept" : "VOIDED", things));
}

void ac2_identity() {
  double worst = 0.0;
  std::size_t rows = 0;
  for (const PqReport& r : all_reports) {
    for (const CategoryReport& c : r.per_category) {
      if (c.n_tp == 0) continue;
      ++rows;
      worst = std::max(worst, std::abs(c.pq - c.sq * c.dq));
    }
  }
  report("AC2", rows > 0 && worst < 1e-9,
         fmt("PQ = SQ*DQ: %zu category rows with TP > 0 across all corpora above, max |PQ - SQ*DQ| %.2e (tol 1e-9)",
             rows, worst));
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "panfuse_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  try {
    ac1_metric_oracle();
    ac3_fusion_direction();
    ac4_learned_srm();
    ac5_gradients();
    ac6_separable();
    ac7_roundtrips(root);
    ac8_schedule();
    ac9_determinism(root);
    ac10_constants();
    ac2_identity();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
