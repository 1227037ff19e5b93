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

#ifndef FACEVSR_TRAIN_HPP_
#define FACEVSR_TRAIN_HPP_

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/augment.hpp"
#include "facevsr/checkpoint.hpp"
#include "facevsr/dataset.hpp"
#include "facevsr/models.hpp"

namespace facevsr::train {

/// Log-scale decay: the rate is init_lr until decay_start_epoch, then
/// init_lr · factor^(epoch − decay_start_epoch + 1). Epochs are 1-based.
struct LrSchedule {
  double init_lr = 3e-4;
  int decay_start_epoch = 5;
  double decay_factor = std::pow(10.0, -0.2);  // a decade every 5 epochs

  double lr_at(int epoch) const {
    if (epoch < decay_start_epoch) return init_lr;
    return init_lr * std::pow(decay_factor, epoch - decay_start_epoch + 1);
  }

  nlohmann::json to_json() const;
  static LrSchedule from_json(const nlohmann::json& j);
};

enum class Scope { kFull, kBackendOnly };

std::string to_string(Scope s);
Scope scope_from_string(const std::string& s);

struct StageSpec {
  std::string name = "III";  // "I" | "II" | "III"
  Scope scope = Scope::kFull;
  LrSchedule lr;
  double weight_decay = 1e-4;
  int max_epochs = 10;

  nlohmann::json to_json() const;
  static StageSpec from_json(const nlohmann::json& j);
};

/// Stages run in order, carrying weights forward. Stages I/II run the
/// temporal-convolution head end-to-end; stage III swaps in the recurrent
/// backend and trains the full model.
struct StagePlan {
  std::vector<StageSpec> stages;
  int batch_size = 32;
  int patience = 3;  // epochs without val improvement before a stage stops

  void validate() const;
  nlohmann::json to_json() const;
  static StagePlan from_json(const nlohmann::json& j);

  /// The three-stage word recipe: LR 3e-4 for I/II, 1e-3 for III; decay
  /// starts at epoch 10 when Cutout is on, epoch 5 otherwise.
  static StagePlan word_default(bool with_cutout);
  /// Just stage III, for compact experiments.
  static StagePlan stage3_only(double init_lr, int max_epochs, bool with_cutout);
};

/// Adam with the usual defaults; weight decay is added to the gradient.
/// Non-trainable parameters are skipped entirely, so a frozen scope stays
/// bit-identical.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<models::NamedParam>& params, double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

struct EpochEvent {
  std::string stage;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // accuracy (word) / WER (sentence)
  nlohmann::json to_json() const;
};

struct TrainResult {
  models::Checkpoint best;          // final stage's best-val checkpoint
  models::Checkpoint final_state;   // parameters after the last epoch
  std::string best_path;            // path base under run_dir/checkpoints
  std::vector<EpochEvent> events;
  double final_train_accuracy = 0.0;  // word task
  double final_val_metric = 0.0;
};

/// Word-level staged training. The config describes the stage-III (BiGRU)
/// topology; earlier stages derive the temporal-conv variant from it.
/// Writes events.log and checkpoints/stage<name>-best.* under run_dir.
/// Throws DivergenceDetected on a non-finite loss after saving the last
/// good checkpoint.
TrainResult train_word(const models::WordModelConfig& config,
                       const data::PreparedDataset& dataset, const StagePlan& plan,
                       const augment::AugmentPolicy& policy, uint64_t seed,
                       const std::string& run_dir);

struct SentenceTrainOptions {
  double lr = 1e-4;       // fixed; no decay, no weight decay
  int max_epochs = 20;
  int patience = 5;
  int min_frames = 2;     // temporal jitter never shrinks a clip below this
};

/// Sentence-level CTC training: flip and temporal jitter only.
TrainResult train_sentence(const models::SentenceModelConfig& config,
                           const data::PreparedDataset& dataset,
                           const SentenceTrainOptions& options,
                           const augment::AugmentPolicy& policy, uint64_t seed,
                           const std::string& run_dir);

struct TransferPlan {
  std::string source_checkpoint;  // path base (without .bin/.json)
  bool freeze = true;
  int fine_tune_epochs = 2;
  double lr = 1e-4;
  int batch_size = 32;

  nlohmann::json to_json() const;
  static TransferPlan from_json(const nlohmann::json& j);
};

/// Copies "frontend.*" arrays from the source checkpoint into the target
/// model. Throws ConfigMismatch when shapes (or the declared frontend
/// geometry) disagree.
void transfer_frontend(models::WordModel& target, const models::Checkpoint& source,
                       bool freeze);

/// Transfer + fine-tune entry point used by the CLI.
TrainResult run_transfer(const models::WordModelConfig& config,
                         const data::PreparedDataset& dataset, const TransferPlan& plan,
                         const augment::AugmentPolicy& policy, uint64_t seed,
                         const std::string& run_dir);

/// Assembles the training batch for the given clip indices, applying the
/// augmentation policy with the per-sample seeding contract
/// (global seed ⊕ clip index ⊕ epoch).
Tensor make_word_batch(const data::PreparedDataset& dataset,
                       const std::vector<int64_t>& indices,
                       const augment::AugmentPolicy& policy, bool training,
                       uint64_t seed, int epoch, std::vector<int>* labels);

}  // namespace facevsr::train

#endif  // FACEVSR_TRAIN_HPP_
