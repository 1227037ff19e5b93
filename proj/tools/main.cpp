// Copyright 2026 The FaceVSR Authors
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
//
// facevsr — visual speech recognition experiments on talking-face video.
//
// Subcommands: synth, prepare, train, eval, transfer, diagnose.
// Exit codes: 0 success, 1 module error (structured JSON on stderr),
// 2 bad arguments.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "facevsr/diagnose.hpp"
#include "facevsr/eval.hpp"
#include "facevsr/run_config.hpp"
#include "facevsr/synthetic.hpp"
#include "facevsr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace facevsr;

namespace {

struct SynthArgs {
  int classes = 8;
  int clips_per_class = 40;
  std::vector<std::string> cues{"mouth"};
  bool redundant = false;
  int frames = 16;
  int canvas = 48;
  uint64_t seed = 0;
  std::string task = "word";
  int sentence_words = 3;
  int sentence_clips = 120;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  data::SyntheticSpec spec;
  spec.num_classes = args.classes;
  spec.clips_per_class = args.clips_per_class;
  spec.cue_regions.clear();
  for (const auto& c : args.cues) spec.cue_regions.push_back(data::cue_region_from_string(c));
  spec.redundancy = args.redundant;
  spec.frames = args.frames;
  spec.canvas_h = args.canvas;
  spec.canvas_w = args.canvas;
  spec.seed = args.seed;
  spec.task = args.task;
  spec.sentence_words = args.sentence_words;
  spec.sentence_clips = args.sentence_clips;
  spec.validate();

  const auto ds = data::generate_synthetic(spec, args.out);
  std::cout << ds.manifest_path << "\n";
  return 0;
}

struct PrepareArgs {
  std::string manifest;
  std::string roi = "face_aligned";
  int out_h = 112, out_w = 112;
  int align_h = 112, align_w = 112;
  double strip_height = 40.0;
  double box_size = 48.0;
  std::vector<double> box;
  double sigma = 0.5;
  bool no_align = false;
  std::string out;
};

int cmd_prepare(const PrepareArgs& args) {
  data::PrepareOptions opt;
  opt.roi.kind = geometry::roi_kind_from_string(args.roi);
  opt.roi.out_h = args.out_h;
  opt.roi.out_w = args.out_w;
  opt.roi.strip_height = args.strip_height;
  opt.roi.box_size = args.box_size;
  if (!args.box.empty()) {
    if (args.box.size() != 4) throw InvalidArgument("--box needs x0 y0 w h");
    std::copy(args.box.begin(), args.box.end(), opt.roi.box.begin());
  }
  opt.align_h = args.align_h;
  opt.align_w = args.align_w;
  opt.smooth_sigma = args.sigma;
  opt.align = !args.no_align &&
              opt.roi.kind != geometry::RoiKind::kFaceDirect &&
              opt.roi.kind != geometry::RoiKind::kMouthFixedBox;

  const auto manifest = data::load_manifest(args.manifest);
  const auto outcome = data::prepare_dataset(manifest, opt, args.out);
  for (const auto& f : outcome.failures) std::cerr << "failed: " << f << "\n";
  std::cout << args.out << " (" << outcome.ok << " clips, " << outcome.failed
            << " failures)\n";
  return outcome.failed == 0 ? 0 : 1;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

cli::RunConfig load_run(const RunArgs& args) {
  cli::RunConfig cfg = cli::RunConfig::load(args.config);
  if (args.seed) cfg.doc["seed"] = *args.seed;
  return cfg;
}

void stamp_run_dir(const cli::RunConfig& cfg, const std::string& out) {
  fs::create_directories(out);
  const fs::path cfg_path = fs::path(out) / "config.json";
  if (fs::exists(cfg_path))
    throw InvalidArgument("run directory already holds a config.json: " + out);
  cfg.save(cfg_path.string());
}

augment::AugmentPolicy policy_from(const cli::RunConfig& cfg) {
  if (!cfg.doc.contains("augment")) return {};
  return augment::AugmentPolicy::from_json(cfg.doc.at("augment"));
}

data::PreparedDataset dataset_from(const cli::RunConfig& cfg, const std::string& out) {
  std::string shards;
  if (cfg.doc.contains("data") && cfg.doc.at("data").contains("shards"))
    shards = cfg.doc.at("data").at("shards").get<std::string>();
  else
    shards = cli::shard_cache_root(out);
  return data::PreparedDataset::load(shards);
}

int cmd_train(const RunArgs& args) {
  const auto cfg = load_run(args);
  stamp_run_dir(cfg, args.out);
  const auto dataset = dataset_from(cfg, args.out);
  const auto policy = policy_from(cfg);

  if (cfg.task() == "word") {
    const auto model_cfg = models::WordModelConfig::from_json(cfg.doc.at("model"));
    const auto plan = train::StagePlan::from_json(cfg.doc.at("train").at("plan"));
    const auto result =
        train::train_word(model_cfg, dataset, plan, policy, cfg.seed(), args.out);
    json summary;
    summary["config_hash"] = cfg.hash();
    summary["best_checkpoint"] = result.best_path;
    summary["train_accuracy"] = result.final_train_accuracy;
    summary["val_metric"] = result.final_val_metric;
    std::cout << summary.dump(2) << "\n";
  } else {
    const auto model_cfg = models::SentenceModelConfig::from_json(cfg.doc.at("model"));
    train::SentenceTrainOptions options;
    if (cfg.doc.contains("train") && cfg.doc.at("train").contains("sentence")) {
      const auto& j = cfg.doc.at("train").at("sentence");
      options.lr = j.value("lr", 1e-4);
      options.max_epochs = j.value("max_epochs", 20);
      options.patience = j.value("patience", 5);
    }
    const auto result =
        train::train_sentence(model_cfg, dataset, options, policy, cfg.seed(), args.out);
    json summary;
    summary["config_hash"] = cfg.hash();
    summary["best_checkpoint"] = result.best_path;
    summary["val_wer"] = result.final_val_metric;
    std::cout << summary.dump(2) << "\n";
  }
  return 0;
}

std::optional<eval::PoseBucketConfig> buckets_from(const cli::RunConfig& cfg) {
  if (!cfg.doc.contains("pose_buckets")) return std::nullopt;
  eval::PoseBucketConfig b;
  if (cfg.doc.at("pose_buckets").contains("thresholds"))
    b.thresholds = cfg.doc.at("pose_buckets").at("thresholds").get<std::vector<double>>();
  return b;
}

int cmd_eval(const RunArgs& args) {
  const auto cfg = load_run(args);
  fs::create_directories(args.out);
  const auto dataset = dataset_from(cfg, args.out);
  const std::string ckpt_path = cfg.doc.at("checkpoint").get<std::string>();
  const auto ckpt = models::Checkpoint::load(ckpt_path);
  const auto buckets = buckets_from(cfg);
  const auto split = data::split_from_string(cfg.doc.value("split", "test"));

  eval::EvalReport report;
  if (cfg.task() == "word") {
    auto model_cfg = models::WordModelConfig::from_json(cfg.doc.at("model"));
    if (model_cfg.config_hash() != ckpt.config_hash)
      throw ConfigMismatch("checkpoint was produced by a different model config");
    models::WordModel model(model_cfg, cfg.seed());
    model.load_state(ckpt.arrays, true);
    report = eval::evaluate_word_model(model, dataset, split, buckets);
  } else {
    auto model_cfg = models::SentenceModelConfig::from_json(cfg.doc.at("model"));
    models::SentenceModel model(model_cfg, cfg.seed());
    model.load_state(ckpt.arrays, true);
    const auto decode = cfg.doc.contains("decode")
                            ? eval::DecodeConfig::from_json(cfg.doc.at("decode"))
                            : eval::DecodeConfig{};
    std::unique_ptr<eval::CharNGramLM> lm;
    if (cfg.doc.contains("lm") && cfg.doc.at("lm").value("enabled", false)) {
      std::vector<std::string> corpus;
      for (const auto& clip : dataset.clips)
        if (clip.split == data::Split::kTrain) corpus.push_back(clip.target);
      lm = std::make_unique<eval::CharNGramLM>(eval::fit_char_lm(
          corpus, cfg.doc.at("lm").value("order", 5), cfg.doc.at("lm").value("add_k", 0.1)));
    }
    report = eval::evaluate_sentence_model(model, dataset, split, decode, lm.get(), buckets);
  }

  json out_json = report.to_json();
  out_json["config_hash"] = cfg.hash();
  std::ofstream f(fs::path(args.out) / "report.json");
  f << out_json.dump(2) << "\n";
  report.write_confusion_csv((fs::path(args.out) / "confusion.csv").string());
  std::cout << out_json.dump(2) << "\n";
  return 0;
}

int cmd_transfer(const RunArgs& args, bool freeze_flag, bool freeze_set) {
  const auto cfg = load_run(args);
  stamp_run_dir(cfg, args.out);
  const auto dataset = dataset_from(cfg, args.out);
  const auto policy = policy_from(cfg);

  auto plan = train::TransferPlan::from_json(cfg.doc.at("transfer"));
  if (freeze_set) plan.freeze = freeze_flag;
  const auto model_cfg = models::WordModelConfig::from_json(cfg.doc.at("model"));
  const auto result =
      train::run_transfer(model_cfg, dataset, plan, policy, cfg.seed(), args.out);

  json summary;
  summary["config_hash"] = cfg.hash();
  summary["best_checkpoint"] = result.best_path;
  summary["frozen"] = plan.freeze;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_diagnose(const RunArgs& args, const std::string& mode) {
  const auto cfg = load_run(args);
  const auto dataset = dataset_from(cfg, args.out);
  const std::string ckpt_path = cfg.doc.at("checkpoint").get<std::string>();
  const auto ckpt = models::Checkpoint::load(ckpt_path);
  auto model_cfg = models::WordModelConfig::from_json(cfg.doc.at("model"));
  models::WordModel model(model_cfg, cfg.seed());
  model.load_state(ckpt.arrays, true);

  const json dj = cfg.doc.value("diagnose", json::object());
  const auto split = data::split_from_string(dj.value("split", "test"));
  const fs::path base = fs::path(args.out) / "diagnostics";

  if (mode == "occlusion") {
    const int patch = dj.value("patch", 7);
    const int stride = dj.value("stride", patch);
    const auto hm = diagnose::occlusion_heatmap(model, dataset, split, patch, stride);
    fs::create_directories(base / "occlusion");
    std::ofstream f(base / "occlusion" / "heatmap.json");
    f << hm.to_json().dump(2) << "\n";
    diagnose::write_heatmap_png((base / "occlusion" / "heatmap.png").string(), hm.drops, 8);
    std::cout << (base / "occlusion" / "heatmap.json").string() << "\n";
    return 0;
  }

  fs::create_directories(base / mode);
  const int64_t max_clips = dj.value("max_clips", 4);
  int64_t done = 0;
  for (int64_t idx : dataset.split_indices(split)) {
    if (done >= max_clips) break;
    const auto& pc = dataset.clips[static_cast<size_t>(idx)];
    Tensor first_frame;
    json j;
    j["clip_id"] = pc.clip_id;
    if (mode == "featmaps") {
      const std::string layer = dj.value("layer", "frontend.stage3");
      const auto fm = diagnose::feature_maps(model, pc.pixels, layer);
      j["layer"] = fm.layer_id;
      j["shape"] = fm.maps.shape();
      first_frame = Tensor({fm.maps.dim(1), fm.maps.dim(2)});
      std::copy(fm.maps.data(), fm.maps.data() + first_frame.numel(), first_frame.data());
    } else if (mode == "saliency") {
      const int target = dataset.label_index(pc.target);
      const auto sal = diagnose::guided_backprop_saliency(model, pc.pixels, target);
      j["target"] = pc.target;
      j["shape"] = sal.values.shape();
      first_frame = Tensor({sal.values.dim(1), sal.values.dim(2)});
      std::copy(sal.values.data(), sal.values.data() + first_frame.numel(), first_frame.data());
    } else {
      throw InvalidArgument("unknown diagnose mode '" + mode + "'");
    }
    std::ofstream f(base / mode / (pc.clip_id + ".json"));
    f << j.dump(2) << "\n";
    diagnose::write_heatmap_png((base / mode / (pc.clip_id + ".png")).string(), first_frame, 4);
    ++done;
  }
  std::cout << (base / mode).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"face-based visual speech recognition experiments"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic talking-face corpus");
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--clips-per-class", synth.clips_per_class);
  synth_cmd->add_option("--cue", synth.cues, "cue region (repeatable)")->capture_default_str();
  synth_cmd->add_flag("--redundant", synth.redundant);
  synth_cmd->add_option("--frames", synth.frames);
  synth_cmd->add_option("--canvas", synth.canvas);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--task", synth.task)->check(CLI::IsMember({"word", "sentence"}));
  synth_cmd->add_option("--sentence-words", synth.sentence_words);
  synth_cmd->add_option("--sentence-clips", synth.sentence_clips);
  synth_cmd->add_option("--out", synth.out)->required();

  PrepareArgs prep;
  auto* prep_cmd = app.add_subcommand("prepare", "smooth, align and crop a dataset");
  prep_cmd->add_option("--manifest", prep.manifest)->required();
  prep_cmd->add_option("--roi", prep.roi);
  prep_cmd->add_option("--out-h", prep.out_h);
  prep_cmd->add_option("--out-w", prep.out_w);
  prep_cmd->add_option("--align-h", prep.align_h);
  prep_cmd->add_option("--align-w", prep.align_w);
  prep_cmd->add_option("--strip-height", prep.strip_height);
  prep_cmd->add_option("--box-size", prep.box_size);
  prep_cmd->add_option("--box", prep.box, "x0 y0 w h for the fixed-box kinds")->expected(4);
  prep_cmd->add_option("--sigma", prep.sigma);
  prep_cmd->add_flag("--no-align", prep.no_align);
  prep_cmd->add_option("--out", prep.out)->required();

  RunArgs train_args, eval_args, transfer_args, diag_args;

  auto add_run_opts = [](CLI::App* cmd, RunArgs& ra) {
    cmd->add_option("--config", ra.config)->required();
    cmd->add_option("--out", ra.out)->required();
    cmd->add_option_function<uint64_t>(
        "--seed", [&ra](const uint64_t& v) { ra.seed = v; });
  };

  auto* train_cmd = app.add_subcommand("train", "run a training config");
  add_run_opts(train_cmd, train_args);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_run_opts(eval_cmd, eval_args);

  auto* transfer_cmd = app.add_subcommand("transfer", "front-end transfer + fine-tune");
  add_run_opts(transfer_cmd, transfer_args);
  bool freeze_flag = false;
  auto* freeze_opt = transfer_cmd->add_flag("--freeze,!--no-freeze", freeze_flag,
                                            "override the plan's freeze setting");

  auto* diag_cmd = app.add_subcommand("diagnose", "model interpretation tools");
  add_run_opts(diag_cmd, diag_args);
  std::string diag_mode = "occlusion";
  diag_cmd->add_option("--mode", diag_mode)
      ->check(CLI::IsMember({"featmaps", "saliency", "occlusion"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (prep_cmd->parsed()) return cmd_prepare(prep);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (transfer_cmd->parsed())
      return cmd_transfer(transfer_args, freeze_flag, freeze_opt->count() > 0);
    if (diag_cmd->parsed()) return cmd_diagnose(diag_args, diag_mode);
  } catch (const Error& e) {
    json err;
    err["error"] = e.code();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = "InternalError";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 2;
}
