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

#include "facevsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "facevsr/ctc.hpp"
#include "facevsr/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facevsr::train {

// ------------------------------------------------------------- schedules

json LrSchedule::to_json() const {
  return {{"init_lr", init_lr}, {"decay_start_epoch", decay_start_epoch},
          {"decay_factor", decay_factor}};
}

LrSchedule LrSchedule::from_json(const json& j) {
  LrSchedule s;
  s.init_lr = j.at("init_lr").get<double>();
  s.decay_start_epoch = j.value("decay_start_epoch", 5);
  s.decay_factor = j.value("decay_factor", std::pow(10.0, -0.2));
  if (s.init_lr <= 0) throw InvalidArgument("init_lr must be positive");
  return s;
}

std::string to_string(Scope s) {
  return s == Scope::kFull ? "full" : "backend_only";
}

Scope scope_from_string(const std::string& s) {
  if (s == "full") return Scope::kFull;
  if (s == "backend_only") return Scope::kBackendOnly;
  throw InvalidArgument("unknown scope '" + s + "'");
}

json StageSpec::to_json() const {
  return {{"name", name}, {"scope", to_string(scope)}, {"lr", lr.to_json()},
          {"weight_decay", weight_decay}, {"max_epochs", max_epochs}};
}

StageSpec StageSpec::from_json(const json& j) {
  StageSpec s;
  s.name = j.at("name").get<std::string>();
  s.scope = scope_from_string(j.value("scope", "full"));
  s.lr = LrSchedule::from_json(j.at("lr"));
  s.weight_decay = j.value("weight_decay", 1e-4);
  s.max_epochs = j.value("max_epochs", 10);
  return s;
}

void StagePlan::validate() const {
  if (stages.empty()) throw InvalidArgument("stage plan has no stages");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  for (const auto& s : stages) {
    if (s.lr.init_lr <= 0) throw InvalidArgument("init_lr must be positive");
    if (s.max_epochs < 0) throw InvalidArgument("max_epochs must be >= 0");
  }
}

json StagePlan::to_json() const {
  json stages_j = json::array();
  for (const auto& s : stages) stages_j.push_back(s.to_json());
  return {{"stages", stages_j}, {"batch_size", batch_size}, {"patience", patience}};
}

StagePlan StagePlan::from_json(const json& j) {
  StagePlan p;
  p.stages.clear();
  for (const auto& s : j.at("stages")) p.stages.push_back(StageSpec::from_json(s));
  p.batch_size = j.value("batch_size", 32);
  p.patience = j.value("patience", 3);
  p.validate();
  return p;
}

StagePlan StagePlan::word_default(bool with_cutout) {
  const int decay_start = with_cutout ? 10 : 5;
  StagePlan p;
  StageSpec s1;
  s1.name = "I";
  s1.lr = {3e-4, decay_start, std::pow(10.0, -0.2)};
  s1.max_epochs = 10;
  StageSpec s2 = s1;
  s2.name = "II";
  StageSpec s3 = s1;
  s3.name = "III";
  s3.lr.init_lr = 1e-3;
  p.stages = {s1, s2, s3};
  p.validate();
  return p;
}

StagePlan StagePlan::stage3_only(double init_lr, int max_epochs, bool with_cutout) {
  StagePlan p;
  StageSpec s;
  s.name = "III";
  s.lr = {init_lr, with_cutout ? 10 : 5, std::pow(10.0, -0.2)};
  s.max_epochs = max_epochs;
  p.stages = {s};
  p.batch_size = 16;
  p.validate();
  return p;
}

// ------------------------------------------------------------------ Adam

void Adam::step(std::vector<models::NamedParam>& params, double lr, double weight_decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& np : params) {
    if (!np.param->trainable) continue;
    auto& [m, v] = moments_[np.name];
    if (m.numel() == 0) {
      m = Tensor(np.param->value.shape());
      v = Tensor(np.param->value.shape());
    }
    Tensor& theta = np.param->value;
    const Tensor& g = np.param->grad;
    for (int64_t i = 0; i < theta.numel(); ++i) {
      const double grad = g[i] + weight_decay * theta[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad * grad;
      theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

json EpochEvent::to_json() const {
  return {{"stage", stage}, {"epoch", epoch}, {"lr", lr},
          {"train_loss", train_loss}, {"val_metric", val_metric}};
}

// --------------------------------------------------------------- batching

Tensor make_word_batch(const data::PreparedDataset& dataset,
                       const std::vector<int64_t>& indices,
                       const augment::AugmentPolicy& policy, bool training,
                       uint64_t seed, int epoch, std::vector<int>* labels) {
  if (indices.empty()) throw InvalidArgument("empty batch");
  std::vector<Tensor> clips;
  clips.reserve(indices.size());
  for (int64_t idx : indices) {
    const auto& pc = dataset.clips[static_cast<size_t>(idx)];
    Rng rng(Rng::mix(Rng::mix(seed, static_cast<uint64_t>(idx)),
                     static_cast<uint64_t>(epoch)));
    clips.push_back(augment::apply_policy(pc.pixels, policy, rng, training));
    if (labels) labels->push_back(dataset.label_index(pc.target));
  }
  const auto& s0 = clips.front().shape();
  Tensor batch({static_cast<int64_t>(clips.size()), s0[0], s0[1], s0[2], s0[3]});
  for (size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].shape() != s0)
      throw ShapeMismatch("word batch needs equal clip shapes");
    std::copy(clips[i].data(), clips[i].data() + clips[i].numel(),
              batch.data() + static_cast<int64_t>(i) * clips[i].numel());
  }
  return batch;
}

namespace {

class EventLog {
 public:
  explicit EventLog(const std::string& run_dir) {
    fs::create_directories(run_dir);
    fs::create_directories(fs::path(run_dir) / "checkpoints");
    out_.open(fs::path(run_dir) / "events.log", std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open events.log under " + run_dir);
  }
  void write(const json& j) {
    out_ << j.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::vector<int64_t> shuffled(std::vector<int64_t> v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  return v;
}

void apply_scope(models::WordModel& model, Scope scope) {
  for (auto& p : model.named_params())
    p.param->trainable = scope == Scope::kFull || p.name.rfind("backend.", 0) == 0;
}

double word_train_accuracy(models::WordModel& model, const data::PreparedDataset& dataset) {
  const auto preds = eval::predict_word_labels(model, dataset, data::Split::kTrain);
  const auto idx = dataset.split_indices(data::Split::kTrain);
  int64_t correct = 0;
  for (size_t i = 0; i < idx.size(); ++i)
    if (preds[i] == dataset.label_index(dataset.clips[static_cast<size_t>(idx[i])].target))
      ++correct;
  return idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
}

double word_val_accuracy(models::WordModel& model, const data::PreparedDataset& dataset) {
  const auto preds = eval::predict_word_labels(model, dataset, data::Split::kVal);
  const auto idx = dataset.split_indices(data::Split::kVal);
  int64_t correct = 0;
  for (size_t i = 0; i < idx.size(); ++i)
    if (preds[i] == dataset.label_index(dataset.clips[static_cast<size_t>(idx[i])].target))
      ++correct;
  return idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
}

struct StageRunResult {
  models::Checkpoint best;
  models::Checkpoint final_state;
  double best_val = 0.0;
  bool diverged = false;
};

StageRunResult run_word_stage(models::WordModel& model, const data::PreparedDataset& dataset,
                              const StageSpec& stage, int batch_size, int patience,
                              const augment::AugmentPolicy& policy, uint64_t seed,
                              EventLog& log, std::vector<EpochEvent>& events) {
  apply_scope(model, stage.scope);
  Adam adam;
  Rng order_rng(Rng::mix(seed, 0x0EDEu));
  const auto train_idx = dataset.split_indices(data::Split::kTrain);

  StageRunResult result;
  auto snapshot = [&](int epoch, double val) {
    models::Checkpoint ckpt;
    ckpt.arrays = model.state_dict();
    ckpt.config_hash = model.config().config_hash();
    ckpt.stage = stage.name;
    ckpt.epoch = epoch;
    ckpt.metrics = {{"val_accuracy", val}};
    return ckpt;
  };
  result.best = snapshot(0, word_val_accuracy(model, dataset));
  result.best_val = result.best.metrics["val_accuracy"].get<double>();

  int since_best = 0;
  for (int epoch = 1; epoch <= stage.max_epochs; ++epoch) {
    const double lr = stage.lr.lr_at(epoch);
    auto order = shuffled(train_idx, order_rng);
    double loss_sum = 0;
    int64_t batches = 0;

    for (size_t off = 0; off < order.size(); off += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(order.size(), off + static_cast<size_t>(batch_size));
      std::vector<int64_t> batch_idx(order.begin() + static_cast<int64_t>(off),
                                     order.begin() + static_cast<int64_t>(end));
      std::vector<int> labels;
      Tensor batch = make_word_batch(dataset, batch_idx, policy, true, seed, epoch, &labels);

      models::Context ctx;
      ctx.mode = models::Mode::kTrain;
      Rng step_rng(Rng::mix(Rng::mix(seed, 0xD0u), static_cast<uint64_t>(batches)));
      ctx.rng = &step_rng;

      model.zero_grad();
      Tensor logits = model.forward(batch, ctx);
      auto [loss, dlogits] = models::cross_entropy(logits, labels);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        return result;
      }
      model.backward(dlogits, ctx);
      auto params = model.named_params();
      adam.step(params, lr, stage.weight_decay);
      loss_sum += loss;
      ++batches;
    }

    const double val = word_val_accuracy(model, dataset);
    EpochEvent ev{stage.name, epoch, lr, batches ? loss_sum / batches : 0.0, val};
    events.push_back(ev);
    log.write(ev.to_json());

    result.final_state = snapshot(epoch, val);
    if (val > result.best_val) {
      result.best_val = val;
      result.best = snapshot(epoch, val);
      since_best = 0;
    } else if (++since_best >= patience) {
      break;
    }
  }
  if (result.final_state.arrays.empty()) result.final_state = result.best;
  return result;
}

}  // namespace

TrainResult train_word(const models::WordModelConfig& config,
                       const data::PreparedDataset& dataset, const StagePlan& plan,
                       const augment::AugmentPolicy& policy, uint64_t seed,
                       const std::string& run_dir) {
  plan.validate();
  if (!dataset.word_task) throw InvalidArgument("train_word needs a word-labeled dataset");
  EventLog log(run_dir);

  std::map<std::string, Tensor> carried;  // frontend weights across stages
  TrainResult result;
  std::string last_good_path;

  for (const auto& stage : plan.stages) {
    models::WordModelConfig stage_cfg = config;
    stage_cfg.backend = (stage.name == "III") ? models::WordBackend::kBiGru
                                              : models::WordBackend::kTemporalConv;
    models::WordModel model(stage_cfg, seed);
    if (!carried.empty()) model.load_state_prefix(carried, "frontend.");

    StageRunResult sr = run_word_stage(model, dataset, stage, plan.batch_size,
                                       plan.patience, policy, seed, log, result.events);

    const std::string path =
        (fs::path(run_dir) / "checkpoints" / ("stage" + stage.name + "-best")).string();
    sr.best.save(path);
    last_good_path = path;

    if (sr.diverged)
      throw DivergenceDetected("non-finite loss in stage " + stage.name +
                               "; last good checkpoint at " + path);

    carried = sr.best.arrays;
    result.best = sr.best;
    result.final_state = sr.final_state;
    result.best_path = path;
    result.final_val_metric = sr.best_val;
  }

  // Report training accuracy of the final best state.
  models::WordModelConfig final_cfg = config;
  final_cfg.backend = plan.stages.back().name == "III" ? models::WordBackend::kBiGru
                                                       : models::WordBackend::kTemporalConv;
  models::WordModel final_model(final_cfg, seed);
  final_model.load_state(result.best.arrays, true);
  result.final_train_accuracy = word_train_accuracy(final_model, dataset);
  return result;
}

// ------------------------------------------------------- sentence training

namespace {

std::vector<int> transcript_to_targets(const std::string& transcript,
                                       const eval::Alphabet& alphabet) {
  std::vector<int> out;
  for (char c : transcript) {
    const auto pos = alphabet.chars.find(c);
    if (pos == std::string::npos)
      throw InvalidArgument(std::string("character '") + c + "' not in alphabet");
    out.push_back(static_cast<int>(pos));
  }
  return out;
}

double sentence_val_wer(models::SentenceModel& model, const data::PreparedDataset& dataset) {
  eval::DecodeConfig cfg;
  cfg.greedy = true;
  const auto report = eval::evaluate_sentence_model(model, dataset, data::Split::kVal,
                                                    cfg, nullptr, std::nullopt);
  return report.wer;
}

}  // namespace

TrainResult train_sentence(const models::SentenceModelConfig& config,
                           const data::PreparedDataset& dataset,
                           const SentenceTrainOptions& options,
                           const augment::AugmentPolicy& policy, uint64_t seed,
                           const std::string& run_dir) {
  if (dataset.word_task) throw InvalidArgument("train_sentence needs transcripts");
  if (policy.cutout || policy.random_crop_to)
    throw InvalidArgument("sentence training uses flip and temporal jitter only");

  EventLog log(run_dir);
  const eval::Alphabet alphabet = eval::Alphabet::lowercase_and_space();
  models::SentenceModel model(config, seed);
  Adam adam;
  Rng order_rng(Rng::mix(seed, 0x0EDEu));
  const auto train_idx = dataset.split_indices(data::Split::kTrain);

  TrainResult result;
  auto snapshot = [&](int epoch, double val) {
    models::Checkpoint ckpt;
    ckpt.arrays = model.state_dict();
    ckpt.config_hash = config.config_hash();
    ckpt.stage = "sentence";
    ckpt.epoch = epoch;
    ckpt.metrics = {{"val_wer", val}};
    return ckpt;
  };

  double best_wer = sentence_val_wer(model, dataset);
  models::Checkpoint best = snapshot(0, best_wer);
  const std::string path = (fs::path(run_dir) / "checkpoints" / "sentence-best").string();
  best.save(path);

  int since_best = 0;
  int64_t step = 0;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    auto order = shuffled(train_idx, order_rng);
    double loss_sum = 0;
    int64_t count = 0;

    for (int64_t idx : order) {
      const auto& pc = dataset.clips[static_cast<size_t>(idx)];
      const auto targets = transcript_to_targets(pc.target, alphabet);

      Rng aug_rng(Rng::mix(Rng::mix(seed, static_cast<uint64_t>(idx)),
                           static_cast<uint64_t>(epoch)));
      Tensor clip = augment::apply_policy(pc.pixels, policy, aug_rng, true);
      // Temporal jitter may shave frames; retreat to the raw clip when the
      // transcript no longer fits.
      if (!models::ctc_target_fits(model.temporal_output_len(clip.dim(0)), targets))
        clip = pc.pixels;

      const auto& s = clip.shape();
      Tensor batch = clip.reshaped({1, s[0], s[1], s[2], s[3]});

      models::Context ctx;
      ctx.mode = models::Mode::kTrain;
      Rng step_rng(Rng::mix(Rng::mix(seed, 0xD0u), static_cast<uint64_t>(step++)));
      ctx.rng = &step_rng;

      model.zero_grad();
      Tensor logits = model.forward(batch, ctx);
      const auto ctc = models::ctc_loss(
          logits.reshaped({logits.dim(1), logits.dim(2)}), targets);
      if (!std::isfinite(ctc.loss)) {
        best.save(path);
        throw DivergenceDetected("non-finite CTC loss; last good checkpoint at " + path);
      }
      Tensor dlogits = ctc.grad_logits.reshaped({1, logits.dim(1), logits.dim(2)});
      model.backward(dlogits, ctx);
      auto params = model.named_params();
      adam.step(params, options.lr, 0.0);
      loss_sum += ctc.loss;
      ++count;
    }

    const double val = sentence_val_wer(model, dataset);
    EpochEvent ev{"sentence", epoch, options.lr, count ? loss_sum / count : 0.0, val};
    result.events.push_back(ev);
    log.write(ev.to_json());
    result.final_state = snapshot(epoch, val);

    if (val < best_wer) {
      best_wer = val;
      best = snapshot(epoch, val);
      best.save(path);
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }

  result.best = best;
  if (result.final_state.arrays.empty()) result.final_state = best;
  result.best_path = path;
  result.final_val_metric = best_wer;
  return result;
}

// ---------------------------------------------------------------- transfer

json TransferPlan::to_json() const {
  return {{"source_checkpoint", source_checkpoint}, {"freeze", freeze},
          {"fine_tune_epochs", fine_tune_epochs}, {"lr", lr},
          {"batch_size", batch_size}};
}

TransferPlan TransferPlan::from_json(const json& j) {
  TransferPlan p;
  p.source_checkpoint = j.at("source_checkpoint").get<std::string>();
  p.freeze = j.value("freeze", true);
  p.fine_tune_epochs = j.value("fine_tune_epochs", 2);
  p.lr = j.value("lr", 1e-4);
  p.batch_size = j.value("batch_size", 32);
  return p;
}

void transfer_frontend(models::WordModel& target, const models::Checkpoint& source,
                       bool freeze) {
  std::map<std::string, Tensor> frontend;
  for (const auto& [name, t] : source.arrays)
    if (name.rfind("frontend.", 0) == 0) frontend[name] = t;
  if (frontend.empty()) throw ConfigMismatch("source checkpoint has no frontend arrays");
  target.load_state_prefix(frontend, "frontend.");  // shape mismatch throws
  target.set_frontend_frozen(freeze);
}

TrainResult run_transfer(const models::WordModelConfig& config,
                         const data::PreparedDataset& dataset, const TransferPlan& plan,
                         const augment::AugmentPolicy& policy, uint64_t seed,
                         const std::string& run_dir) {
  EventLog log(run_dir);
  models::WordModel model(config, seed);
  const models::Checkpoint source = models::Checkpoint::load(plan.source_checkpoint);
  transfer_frontend(model, source, plan.freeze);

  StageSpec stage;
  stage.name = "III";
  stage.scope = plan.freeze ? Scope::kBackendOnly : Scope::kFull;
  stage.lr = {plan.lr, 1 << 20, std::pow(10.0, -0.2)};  // effectively constant
  stage.weight_decay = 0.0;
  stage.max_epochs = plan.fine_tune_epochs;

  TrainResult result;
  StageRunResult sr = run_word_stage(model, dataset, stage, plan.batch_size,
                                     /*patience=*/plan.fine_tune_epochs + 1, policy, seed,
                                     log, result.events);
  const std::string path = (fs::path(run_dir) / "checkpoints" / "transfer-best").string();
  sr.best.save(path);
  sr.final_state.save((fs::path(run_dir) / "checkpoints" / "transfer-final").string());
  if (sr.diverged) throw DivergenceDetected("transfer fine-tune diverged; see " + path);

  result.best = sr.best;
  result.final_state = sr.final_state;
  result.best_path = path;
  result.final_val_metric = sr.best_val;
  return result;
}

}  // namespace facevsr::train
