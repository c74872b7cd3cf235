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

#include "panfuse/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include "CLI11.hpp"
#include "panfuse/corpus.hpp"
#include "panfuse/errors.hpp"
#include "panfuse/fusion.hpp"
#include "panfuse/parallel.hpp"
#include "panfuse/pq.hpp"
#include "panfuse/ranking.hpp"
#include "panfuse/synth.hpp"
#include "panfuse/training.hpp"

namespace panfuse {

namespace fs = std::filesystem;

namespace {

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string categories;
  std::string out;
  unsigned jobs = 1;
};

struct MergeArgs {
  std::string instances;
  std::string stuff;
  std::string out_dir;
  std::string name;
  std::string mode = "heuristic";
  std::string ranking_order = "global";
  std::string suffix = kInstancesSuffix;
  std::size_t max_boxes = 100;
  Index min_stuff_area = 4900;
  double overlap_drop = 0.5;
  unsigned jobs = 1;
};

struct TrainArgs {
  std::string corpus;
  std::string weights_out;
  std::string loss_csv;
  std::string shape = "1x7+7x1";
  std::string preset = "desk";
  std::vector<std::string> decay;
  std::optional<double> base_lr, warmup_start_lr, momentum, weight_decay;
  std::optional<std::int64_t> warmup_iters, total_iters;
  std::uint64_t seed = 0;
};

struct ScoreArgs {
  std::string weights;
  std::string instances;
  std::string categories;
  std::string out;
  std::string suffix = kInstancesSuffix;
};

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t count = 10;
  SceneSpec spec;
  unsigned jobs = 1;
};

struct ConvertArgs {
  std::string dir;
  std::string categories;
  std::string coco;
  std::string png_dir;
  std::string stuff;
  std::string out;
};

class Log {
 public:
  Log(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  std::ostream& out() { return out_; }
  void warn(const std::string& message) {
    std::lock_guard<std::mutex> lock(mu_);
    err_ << "warning: " << message << '\n';
  }

 private:
  std::ostream& out_;
  std::ostream& err_;
  std::mutex mu_;
};

LabelMap load_stuff_labels(const fs::path& path) {
  if (path.extension() == ".png") return decode_ids(read_png(path));
  return stuff_argmax(read_stuff_map(path));
}

FusionParams fusion_params(const MergeArgs& a) {
  FusionParams p;
  p.max_boxes = a.max_boxes;
  p.min_stuff_area = a.min_stuff_area;
  p.overlap_drop_fraction = a.overlap_drop;
  p.mode = a.mode == "ranking" ? FusionMode::kRanking : FusionMode::kHeuristic;
  p.ranking_order = a.ranking_order == "pairwise" ? RankingOrder::kPairwise : RankingOrder::kGlobal;
  return p;
}

PanopticImage merge_files(const fs::path& instances_path, const fs::path& stuff_path,
                          const FusionParams& params) {
  const Json doc = read_json_file(instances_path);
  const LabelMap stuff = load_stuff_labels(stuff_path);
  if (params.mode == FusionMode::kRanking) {
    return merge(parse_ranked_instances(doc, instances_path.parent_path()), stuff, params);
  }
  return merge(parse_instances(doc, instances_path.parent_path()), stuff, params);
}

int cmd_eval(const EvalArgs& a, Log& log) {
  const fs::path gt_dir = a.gt_dir;
  const fs::path cat_path = a.categories.empty() ? gt_dir / kCategoriesFile : fs::path(a.categories);
  const CategoryTable categories = load_categories(cat_path);
  const Dataset gt = load_dataset(gt_dir, categories);
  const Dataset pred = load_dataset(a.pred_dir, categories);
  EvalOptions options;
  options.jobs = a.jobs;
  options.warn = [&](const std::string& m) { log.warn(m); };
  const PqReport report = evaluate_dataset(pred, gt, options);
  if (!a.out.empty()) write_json_file(a.out, report_to_json(report));
  log.out() << report_table(report);
  return kExitOk;
}

int cmd_merge(const MergeArgs& a, Log& log) {
  const FusionParams params = fusion_params(a);
  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir);
  if (!fs::is_directory(a.instances)) {
    std::string stem = a.name;
    if (stem.empty()) {
      stem = fs::path(a.instances).filename().string();
      stem = stem.substr(0, stem.find('.'));
    }
    save_annotation(out_dir, stem, merge_files(a.instances, a.stuff, params), 0);
    log.out() << "merged 1 image into " << out_dir.string() << '\n';
    return kExitOk;
  }

  const std::vector<std::string> stems = list_stems(a.instances, a.suffix);
  const fs::path stuff_dir = a.stuff.empty() ? fs::path(a.instances) : fs::path(a.stuff);
  parallel_for(stems.size(), a.jobs, [&](std::size_t i) {
    const std::string& stem = stems[i];
    fs::path stuff_path = stuff_dir / (stem + kStuffSuffix);
    if (!fs::exists(stuff_path)) stuff_path = stuff_dir / (stem + ".png");
    const PanopticImage merged =
        merge_files(fs::path(a.instances) / (stem + a.suffix), stuff_path, params);
    save_annotation(out_dir, stem, merged, static_cast<std::int64_t>(i));
  });
  if (stems.empty()) log.warn("no *" + a.suffix + " files in " + a.instances);
  log.out() << "merged " << stems.size() << " images into " << out_dir.string() << '\n';
  return kExitOk;
}

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (a.preset == "full") {
    cfg = TrainConfig::full();
  } else if (a.preset != "desk") {
    throw InvalidInputError("unknown preset '" + a.preset + "' (expected desk or full)");
  }
  if (a.base_lr) cfg.base_lr = *a.base_lr;
  if (a.warmup_start_lr) cfg.warmup_start_lr = *a.warmup_start_lr;
  if (a.momentum) cfg.momentum = *a.momentum;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.warmup_iters) cfg.warmup_iters = *a.warmup_iters;
  if (a.total_iters) cfg.total_iters = *a.total_iters;
  if (!a.decay.empty()) {
    cfg.decay_points.clear();
    for (const std::string& item : a.decay) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw InvalidInputError("decay point '" + item + "' must look like ITER:LR");
      }
      cfg.decay_points.push_back(
          DecayPoint{std::stoll(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    }
  }
  cfg.seed = a.seed;
  cfg.shape = parse_conv_shape(a.shape);
  cfg.validate();
  return cfg;
}

int cmd_srm_train(const TrainArgs& a, Log& log) {
  const TrainConfig cfg = train_config(a);
  const fs::path root = a.corpus;
  const ThingChannels channels =
      ThingChannels::from_table(load_categories(root / "gt" / kCategoriesFile));
  std::vector<SrmSample> samples;
  for (const CorpusScene& cs : read_corpus(root)) {
    samples.push_back(make_srm_sample(cs.scene.gt, cs.scene.preds, channels));
  }
  const TrainResult result = train_srm(samples, cfg, [&](const std::string& m) { log.warn(m); });
  save_weights(fs::path(a.weights_out), result.weights);
  if (!a.loss_csv.empty()) {
    std::ofstream csv(a.loss_csv);
    if (!csv) throw IoError("cannot open " + a.loss_csv + " for writing");
    csv << loss_curve_csv(result.curve);
  }
  char line[160];
  std::snprintf(line, sizeof(line), "trained %s on %zu scenes: mean loss %.4f -> %.4f\n",
                to_string(cfg.shape), result.used_samples, result.initial_mean_loss,
                result.final_mean_loss);
  log.out() << line;
  return kExitOk;
}

int cmd_srm_score(const ScoreArgs& a, Log& log) {
  const ConvSpec<double> spec = load_weights(fs::path(a.weights));
  const ThingChannels channels = ThingChannels::from_table(load_categories(a.categories));
  auto score_file = [&](const fs::path& in, const fs::path& out) {
    const auto instances = parse_instances(read_json_file(in), in.parent_path());
    const auto ranked = rank_instances(instances, spec, channels);
    write_json_file(out, ranked_instances_to_json(ranked));
  };
  if (!fs::is_directory(a.instances)) {
    score_file(a.instances, a.out);
    log.out() << "scored 1 file\n";
    return kExitOk;
  }
  fs::create_directories(a.out);
  const auto stems = list_stems(a.instances, a.suffix);
  for (const std::string& stem : stems) {
    score_file(fs::path(a.instances) / (stem + a.suffix), fs::path(a.out) / (stem + kRankedSuffix));
  }
  log.out() << "scored " << stems.size() << " files\n";
  return kExitOk;
}

int cmd_synth(const SynthArgs& a, Log& log) {
  SceneSpec spec = a.spec;
  spec.seed = a.seed;
  const std::vector<Scene> scenes = generate_corpus(spec, a.count, a.jobs);
  write_corpus(a.out, scenes, spec);
  log.out() << "wrote " << scenes.size() << " scenes to " << a.out << '\n';
  return kExitOk;
}

// Fills options not given on the command line from a key-value file. Keys
// may use '_' or '-' between words.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::FileError& e) {
    throw IoError(e.what());
  } catch (const CLI::ParseError& e) {
    throw SchemaError(path + ": " + e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = item.parents.empty() ? cmd.get_option_no_throw("--" + name) : nullptr;
    if (opt == nullptr || name == "config") {
      throw SchemaError(path + ": unknown key '" + item.fullname() + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw InvalidInputError(path + ": " + item.fullname() + ": " + e.what());
    }
  }
}

int report_error(const std::exception& e, int code, Log& log, std::ostream& err) {
  (void)log;
  err << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Panoptic fusion, spatial ranking and Panoptic Quality toolkit", "panfuse"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted annotations against ground truth (PQ/SQ/DQ)");
  eval_cmd->add_option("--pred", eval.pred_dir, "Directory of predicted <stem>.json/<stem>.png pairs")->required();
  eval_cmd->add_option("--gt", eval.gt_dir, "Directory of ground-truth <stem>.json/<stem>.png pairs")->required();
  eval_cmd->add_option("--categories", eval.categories, "Category table (default: <gt>/categories.json)");
  eval_cmd->add_option("--out", eval.out, "Write the JSON report here");
  eval_cmd->add_option("--jobs", eval.jobs, "Worker threads")->envname("PANFUSE_JOBS")->capture_default_str();

  MergeArgs mg;
  auto* merge_cmd = app.add_subcommand("merge", "Fuse instance predictions and stuff maps into panoptic annotations");
  merge_cmd->add_option("--instances", mg.instances, "Instance JSON file, or a directory of <stem><suffix> files")->required();
  merge_cmd->add_option("--stuff", mg.stuff, "Stuff map (.spm or category-id .png), or a directory of <stem>.stuff.spm");
  merge_cmd->add_option("--out", mg.out_dir, "Output annotation directory")->required();
  merge_cmd->add_option("--name", mg.name, "Output stem in single-file mode");
  merge_cmd->add_option("--mode", mg.mode, "Paint order: heuristic (detection score) or ranking (ranking score)")
      ->check(CLI::IsMember({"heuristic", "ranking"}))->capture_default_str();
  merge_cmd->add_option("--ranking-order", mg.ranking_order,
                        "global: sort all instances by ranking score; pairwise: ranking score decides only between overlapping instances")
      ->check(CLI::IsMember({"global", "pairwise"}))->capture_default_str();
  merge_cmd->add_option("--max-boxes", mg.max_boxes, "Max number of boxes kept per image (default 100)")->capture_default_str();
  merge_cmd->add_option("--min-stuff-area", mg.min_stuff_area,
                        "Min area of a connected stuff region in pixels; smaller regions become void (default 4900)")->capture_default_str();
  merge_cmd->add_option("--overlap-drop", mg.overlap_drop,
                        "Drop an instance when more than this fraction of its mask is already claimed (default 0.5)")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  merge_cmd->add_option("--instances-suffix", mg.suffix, "Instance file suffix in directory mode")->capture_default_str();
  merge_cmd->add_option("--jobs", mg.jobs, "Worker threads")->envname("PANFUSE_JOBS")->capture_default_str();

  auto* srm_cmd = app.add_subcommand("srm", "Spatial ranking model");
  srm_cmd->require_subcommand(1);
  TrainArgs tr;
  auto* train_cmd = srm_cmd->add_subcommand("train", "Train the ranking convolution on a synthetic corpus");
  std::string train_config_file;
  train_cmd->add_option("--config", train_config_file,
                        "TOML/INI key-value file with any of these options (flags given on the command line win)");
  train_cmd->add_option("--corpus", tr.corpus, "Synthetic corpus root")->required();
  train_cmd->add_option("--weights-out", tr.weights_out, "Output weight record")->required();
  train_cmd->add_option("--loss-csv", tr.loss_csv, "Write iteration,lr,loss rows here");
  train_cmd->add_option("--shape", tr.shape, "Kernel: 1x1, 3x3 or 1x7+7x1")
      ->check(CLI::IsMember({"1x1", "3x3", "1x7+7x1"}))->capture_default_str();
  train_cmd->add_option("--preset", tr.preset,
                        "desk: 2000 iters, warmup 40, decay at 1200/1600; full: 100000 iters, warmup 2000, decay at 60000/80000. "
                        "Both warm up linearly from 0.002 to 0.02 and decay to 0.002 then 0.0002")
      ->check(CLI::IsMember({"desk", "full"}))->capture_default_str();
  train_cmd->add_option("--base-lr", tr.base_lr, "Learning rate after warmup (default 0.02)");
  train_cmd->add_option("--warmup-start-lr", tr.warmup_start_lr, "Learning rate at iteration 0 (default 0.002)");
  train_cmd->add_option("--warmup-iters", tr.warmup_iters, "Linear warmup length");
  train_cmd->add_option("--total-iters", tr.total_iters, "Number of iterations");
  train_cmd->add_option("--decay", tr.decay, "Decay points as ITER:LR, repeatable");
  train_cmd->add_option("--momentum", tr.momentum, "SGD momentum (default 0.9)");
  train_cmd->add_option("--weight-decay", tr.weight_decay, "Weight decay on kernel coefficients (default 0.0001)");
  train_cmd->add_option("--seed", tr.seed, "Weight initialisation seed")->capture_default_str();

  ScoreArgs sc;
  auto* score_cmd = srm_cmd->add_subcommand("score", "Attach ranking scores to instance predictions");
  score_cmd->add_option("--weights", sc.weights, "Weight record")->required();
  score_cmd->add_option("--instances", sc.instances, "Instance JSON file or directory")->required();
  score_cmd->add_option("--categories", sc.categories, "Category table; thing categories define the channels")->required();
  score_cmd->add_option("--out", sc.out, "Output file (or directory of <stem>.ranked.json)")->required();
  score_cmd->add_option("--instances-suffix", sc.suffix, "Instance file suffix in directory mode")->capture_default_str();

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted occlusions");
  synth_cmd->add_option("--out", sy.out, "Corpus root")->required();
  synth_cmd->add_option("--seed", sy.seed, "Master seed")->required();
  synth_cmd->add_option("--count", sy.count, "Number of scenes")->capture_default_str();
  synth_cmd->add_option("--width", sy.spec.width, "Image width")->capture_default_str();
  synth_cmd->add_option("--height", sy.spec.height, "Image height")->capture_default_str();
  synth_cmd->add_option("--things", sy.spec.n_things, "Thing instances per scene")->capture_default_str();
  synth_cmd->add_option("--stuff-regions", sy.spec.n_stuff_regions, "Stuff bands per scene")->capture_default_str();
  synth_cmd->add_option("--pairs", sy.spec.occlusion_pairs, "Planted occluder/occludee pairs")->capture_default_str();
  synth_cmd->add_option("--score-bias", sy.spec.score_bias, "Bias of detection scores toward the occluder")->capture_default_str();
  synth_cmd->add_option("--noise", sy.spec.noise, "Mask boundary flip probability")->capture_default_str();
  synth_cmd->add_option("--jobs", sy.jobs, "Worker threads")->envname("PANFUSE_JOBS")->capture_default_str();

  ConvertArgs cv;
  auto* convert_cmd = app.add_subcommand("convert", "Format conversion");
  convert_cmd->require_subcommand(1);
  auto* to_coco = convert_cmd->add_subcommand("to-coco", "Collect an annotation directory into one COCO panoptic JSON");
  to_coco->add_option("--dir", cv.dir, "Annotation directory")->required();
  to_coco->add_option("--categories", cv.categories, "Category table (default: <dir>/categories.json)");
  to_coco->add_option("--out", cv.out, "Output JSON")->required();
  auto* from_coco = convert_cmd->add_subcommand("from-coco", "Split a COCO panoptic JSON into an annotation directory");
  from_coco->add_option("--coco", cv.coco, "COCO panoptic JSON")->required();
  from_coco->add_option("--png-dir", cv.png_dir, "Directory of id-encoded PNGs")->required();
  from_coco->add_option("--out", cv.out, "Output directory")->required();
  auto* stuff_png = convert_cmd->add_subcommand("stuff-png", "Argmax a .spm stuff map into a category-id PNG");
  stuff_png->add_option("--stuff", cv.stuff, "Stuff probability map")->required();
  stuff_png->add_option("--out", cv.out, "Output PNG")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  Log log(out, err);
  try {
    if (*train_cmd && !train_config_file.empty()) apply_config_file(*train_cmd, train_config_file);
    if (*eval_cmd) return cmd_eval(eval, log);
    if (*merge_cmd) return cmd_merge(mg, log);
    if (*train_cmd) return cmd_srm_train(tr, log);
    if (*score_cmd) return cmd_srm_score(sc, log);
    if (*synth_cmd) return cmd_synth(sy, log);
    if (*to_coco) {
      write_json_file(cv.out, annotations_to_coco(cv.dir, cv.categories));
      return kExitOk;
    }
    if (*from_coco) {
      coco_to_annotations(read_json_file(cv.coco), cv.png_dir, cv.out);
      return kExitOk;
    }
    if (*stuff_png) {
      write_png(cv.out, encode_ids(stuff_argmax(read_stuff_map(cv.stuff))));
      return kExitOk;
    }
  } catch (const DivergenceError& e) {
    return report_error(e, kExitDivergence, log, err);
  } catch (const SchemaError& e) {
    return report_error(e, kExitIo, log, err);
  } catch (const IoError& e) {
    return report_error(e, kExitIo, log, err);
  } catch (const EncodingOverflowError& e) {
    return report_error(e, kExitIo, log, err);
  } catch (const Error& e) {
    return report_error(e, kExitValidation, log, err);
  } catch (const fs::filesystem_error& e) {
    return report_error(e, kExitIo, log, err);
  } catch (const std::invalid_argument& e) {
    return report_error(e, kExitValidation, log, err);
  }
  return kExitValidation;
}

}  // namespace panfuse
