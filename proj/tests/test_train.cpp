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

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "facevsr/ctc.hpp"
#include "facevsr/eval.hpp"
#include "facevsr/train.hpp"
#include "test_util.hpp"

using namespace facevsr;
namespace fs = std::filesystem;

namespace {

data::PreparedDataset tiny_word_corpus(const std::string& tag, int classes = 2,
                                       int per_class = 6) {
  data::SyntheticSpec spec;
  spec.num_classes = classes;
  spec.clips_per_class = per_class;
  spec.frames = 6;
  spec.canvas_h = 36;
  spec.canvas_w = 36;
  spec.seed = 77;
  return test_util::prepared_corpus(spec, test_util::temp_dir(tag).string(),
                                    test_util::face_options(24, 24));
}

models::WordModelConfig tiny_cfg(int classes, int input) {
  return models::WordModelConfig::compact(classes, input, input, 4, 8);
}

bool same_tensor(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("lr schedule: exact log-scale decay formula") {
  train::LrSchedule s{3e-4, 5, std::pow(10.0, -0.2)};
  for (int e = 1; e < 5; ++e) CHECK(s.lr_at(e) == 3e-4);
  for (int e = 5; e <= 14; ++e)
    CHECK(s.lr_at(e) ==
          doctest::Approx(3e-4 * std::pow(std::pow(10.0, -0.2), e - 5 + 1)).epsilon(1e-15));
  // a decade every five epochs
  CHECK(s.lr_at(9) / s.lr_at(14) == doctest::Approx(10.0).epsilon(1e-9));

  // cutout shifts the decay start from epoch 5 to epoch 10
  const auto plain = train::StagePlan::word_default(false);
  const auto cut = train::StagePlan::word_default(true);
  CHECK(plain.stages[0].lr.decay_start_epoch == 5);
  CHECK(cut.stages[0].lr.decay_start_epoch == 10);
  CHECK(plain.stages[0].lr.init_lr == doctest::Approx(3e-4));
  CHECK(plain.stages[2].lr.init_lr == doctest::Approx(1e-3));
  CHECK(plain.stages.size() == 3);
}

TEST_CASE("train_word: max_epochs 0 returns initial checkpoints unchanged") {
  const auto ds = tiny_word_corpus("train_noop");
  const auto run = test_util::temp_dir("train_noop_run");
  const auto cfg = tiny_cfg(2, 24);

  train::StagePlan plan = train::StagePlan::stage3_only(1e-3, 0, false);
  plan.batch_size = 4;
  augment::AugmentPolicy policy;

  const auto result = train::train_word(cfg, ds, plan, policy, 5, run.string());
  CHECK(result.events.empty());

  models::WordModel fresh(cfg, 5);  // same construction seed
  const auto init_state = fresh.state_dict();
  for (const auto& [name, t] : result.best.arrays)
    CHECK(same_tensor(t, init_state.at(name)));
  CHECK(fs::exists(run / "checkpoints" / "stageIII-best.bin"));
  CHECK(fs::exists(run / "events.log"));
}

TEST_CASE("adam: one step on a frozen scope leaves it bit-identical") {
  const auto cfg = tiny_cfg(2, 24);
  models::WordModel model(cfg, 3);
  model.set_frontend_frozen(true);
  const auto before = model.state_dict();

  Rng rng(4);
  Tensor batch({2, 4, 24, 24, 1});
  for (int64_t i = 0; i < batch.numel(); ++i) batch[i] = rng.uniform();
  models::Context ctx;
  ctx.mode = models::Mode::kTrain;

  model.zero_grad();
  Tensor logits = model.forward(batch, ctx);
  auto [loss, dlogits] = models::cross_entropy(logits, {0, 1});
  model.backward(dlogits, ctx);

  train::Adam adam;
  auto params = model.named_params();
  adam.step(params, 1e-3, 1e-4);

  const auto after = model.state_dict();
  bool backend_changed = false;
  for (const auto& [name, t] : after) {
    if (name.rfind("frontend.", 0) == 0) {
      CHECK(same_tensor(t, before.at(name)));
    } else if (!same_tensor(t, before.at(name))) {
      backend_changed = true;
    }
  }
  CHECK(backend_changed);
}

TEST_CASE("loss strictly decreases over the first 5 steps on a fixed batch") {
  const auto ds = tiny_word_corpus("train_descent");
  const auto cfg = tiny_cfg(2, 24);
  models::WordModel model(cfg, 11);

  std::vector<int> labels;
  std::vector<int64_t> idx = ds.split_indices(data::Split::kTrain);
  idx.resize(6);
  augment::AugmentPolicy policy;
  const Tensor batch = train::make_word_batch(ds, idx, policy, false, 0, 0, &labels);

  models::Context ctx;
  ctx.mode = models::Mode::kTrain;
  train::Adam adam;
  double prev = 1e300;
  for (int step = 0; step < 5; ++step) {
    model.zero_grad();
    Tensor logits = model.forward(batch, ctx);
    auto [loss, dlogits] = models::cross_entropy(logits, labels);
    CHECK(loss < prev);
    prev = loss;
    model.backward(dlogits, ctx);
    auto params = model.named_params();
    adam.step(params, 1e-4, 0.0);
  }
}

TEST_CASE("train_word: stage handoff carries frontend weights exactly") {
  const auto ds = tiny_word_corpus("train_handoff");
  const auto run = test_util::temp_dir("train_handoff_run");
  const auto cfg = tiny_cfg(2, 24);

  train::StagePlan plan;
  train::StageSpec s1;
  s1.name = "I";
  s1.lr = {1e-3, 100, 1.0};
  s1.max_epochs = 1;
  train::StageSpec s3;
  s3.name = "III";
  s3.lr = {1e-3, 100, 1.0};
  s3.max_epochs = 0;  // snapshot of the handed-off state
  plan.stages = {s1, s3};
  plan.batch_size = 4;

  augment::AugmentPolicy policy;
  train::train_word(cfg, ds, plan, policy, 21, run.string());

  const auto ck1 = models::Checkpoint::load((run / "checkpoints" / "stageI-best").string());
  const auto ck3 = models::Checkpoint::load((run / "checkpoints" / "stageIII-best").string());
  size_t compared = 0;
  for (const auto& [name, t] : ck1.arrays) {
    if (name.rfind("frontend.", 0) != 0) continue;
    CHECK(same_tensor(t, ck3.arrays.at(name)));
    ++compared;
  }
  CHECK(compared > 0);
  // the two stages run different heads
  CHECK(ck1.arrays.count("backend.tconv.weight") == 1);
  CHECK(ck3.arrays.count("backend.gru.l0.fw.w_ih") == 1);
}

TEST_CASE("train_word: divergence aborts with the last good checkpoint on disk") {
  auto ds = tiny_word_corpus("train_diverge");
  const auto run = test_util::temp_dir("train_diverge_run");

  // a step size near the double range blows the readout up to ±inf, and the
  // next batch's loss stops being finite
  train::StagePlan plan = train::StagePlan::stage3_only(1e307, 3, false);
  plan.batch_size = 4;
  augment::AugmentPolicy policy;

  CHECK_THROWS_AS(
      train::train_word(tiny_cfg(2, 24), ds, plan, policy, 5, run.string()),
      DivergenceDetected);
  CHECK(fs::exists(run / "checkpoints" / "stageIII-best.bin"));
}

TEST_CASE("transfer_frontend: freeze keeps the frontend bitwise; unfrozen moves") {
  const auto ds = tiny_word_corpus("transfer");
  const auto cfg = tiny_cfg(2, 24);

  // a "source" checkpoint from a briefly trained model
  const auto src_run = test_util::temp_dir("transfer_src");
  train::StagePlan plan = train::StagePlan::stage3_only(1e-3, 1, false);
  plan.batch_size = 4;
  augment::AugmentPolicy policy;
  const auto src = train::train_word(cfg, ds, plan, policy, 31, src_run.string());

  SUBCASE("freeze=true") {
    train::TransferPlan tp;
    tp.source_checkpoint = src.best_path;
    tp.freeze = true;
    tp.fine_tune_epochs = 2;
    tp.batch_size = 4;
    const auto run = test_util::temp_dir("transfer_frozen_run");
    const auto result = train::run_transfer(cfg, ds, tp, policy, 32, run.string());

    // both the best and the end-of-run state keep the frontend bitwise
    size_t checked = 0;
    bool backend_changed = false;
    for (const auto* state : {&result.best.arrays, &result.final_state.arrays}) {
      for (const auto& [name, t] : *state) {
        if (name.rfind("frontend.", 0) == 0) {
          CHECK(same_tensor(t, src.best.arrays.at(name)));
          ++checked;
        }
      }
    }
    for (const auto& [name, t] : result.final_state.arrays)
      if (name.rfind("backend.", 0) == 0 && src.best.arrays.count(name) &&
          !same_tensor(t, src.best.arrays.at(name)))
        backend_changed = true;
    CHECK(checked > 0);
    CHECK(backend_changed);
    CHECK(fs::exists(run / "checkpoints" / "transfer-final.bin"));
  }

  SUBCASE("freeze=false lets the frontend move") {
    train::TransferPlan tp;
    tp.source_checkpoint = src.best_path;
    tp.freeze = false;
    tp.fine_tune_epochs = 2;
    tp.batch_size = 4;
    const auto run = test_util::temp_dir("transfer_free_run");
    const auto result = train::run_transfer(cfg, ds, tp, policy, 33, run.string());

    bool frontend_changed = false;
    for (const auto& [name, t] : result.final_state.arrays)
      if (name.rfind("frontend.", 0) == 0 && !same_tensor(t, src.best.arrays.at(name)))
        frontend_changed = true;
    CHECK(frontend_changed);
  }

  SUBCASE("mismatched frontend geometry is rejected") {
    models::WordModelConfig other = models::WordModelConfig::compact(2, 24, 24, 8, 8);
    models::WordModel target(other, 1);
    const auto source = models::Checkpoint::load(src.best_path);
    CHECK_THROWS_AS(train::transfer_frontend(target, source, true), ConfigMismatch);
  }
}

TEST_CASE("make_word_batch: per-sample seeding is reproducible per epoch") {
  const auto ds = tiny_word_corpus("batch_seed");
  augment::AugmentPolicy policy;
  policy.cutout = augment::CutoutConfig{8, 8, 1.0, 0.0};
  policy.hflip_prob = 0.5;

  const std::vector<int64_t> idx{0, 1, 2};
  const Tensor a = train::make_word_batch(ds, idx, policy, true, 9, 3, nullptr);
  const Tensor b = train::make_word_batch(ds, idx, policy, true, 9, 3, nullptr);
  CHECK(same_tensor(a, b));
  const Tensor c = train::make_word_batch(ds, idx, policy, true, 9, 4, nullptr);
  CHECK(!same_tensor(a, c));  // a new epoch draws new augmentations
}

TEST_CASE("train_sentence: grammar corpus reaches low train WER") {
  data::SyntheticSpec spec;
  spec.task = "sentence";
  spec.num_classes = 3;
  spec.sentence_words = 2;
  spec.sentence_clips = 30;
  spec.frames = 16;
  spec.canvas_h = 36;
  spec.canvas_w = 36;
  spec.seed = 51;
  const auto ds = test_util::prepared_corpus(
      spec, test_util::temp_dir("sent_corpus").string(), test_util::face_options(24, 24));

  models::SentenceModelConfig cfg = models::SentenceModelConfig::compact(27, 24, 24);
  cfg.dropout = 0.1;
  cfg.rnn_hidden = 64;

  train::SentenceTrainOptions options;
  options.lr = 1e-3;
  options.max_epochs = 60;
  options.patience = 60;

  augment::AugmentPolicy policy;
  policy.hflip_prob = 0.5;
  policy.temporal_jitter_prob = 0.05;

  const auto run = test_util::temp_dir("sent_run");
  const auto result =
      train::train_sentence(cfg, ds, options, policy, 52, run.string());

  // measure train-split WER of the converged state with greedy decode
  models::SentenceModel model(cfg, 1);
  model.load_state(result.final_state.arrays, true);
  eval::DecodeConfig dc;
  dc.greedy = true;
  const auto report = eval::evaluate_sentence_model(model, ds, data::Split::kTrain, dc,
                                                    nullptr, std::nullopt);
  CHECK(report.wer <= 0.05);

  // the CTC loss of the truth never beats the forced-alignment bound
  models::Context ctx;
  const auto& pc = ds.clips.front();
  const auto& s = pc.pixels.shape();
  Tensor logits = model.forward(pc.pixels.reshaped({1, s[0], s[1], s[2], s[3]}), ctx);
  std::vector<int> target;
  const auto ab = eval::Alphabet::lowercase_and_space();
  for (char ch : pc.target) target.push_back(static_cast<int>(ab.chars.find(ch)));
  const auto res = models::ctc_loss(logits.reshaped({logits.dim(1), logits.dim(2)}), target);
  const Tensor lp = models::log_softmax(logits.reshaped({logits.dim(1), logits.dim(2)}));
  CHECK(res.loss <= models::ctc_viterbi_nll(lp, target) + 1e-9);
}

TEST_CASE("train_sentence: rejects cutout or cropping policies") {
  data::SyntheticSpec spec;
  spec.task = "sentence";
  spec.num_classes = 2;
  spec.sentence_clips = 6;
  spec.frames = 8;
  spec.seed = 3;
  const auto ds = test_util::prepared_corpus(
      spec, test_util::temp_dir("sent_policy").string(), test_util::face_options(24, 24));

  augment::AugmentPolicy bad;
  bad.cutout = augment::CutoutConfig{8, 8, 1.0, 0.0};
  train::SentenceTrainOptions options;
  options.max_epochs = 1;
  CHECK_THROWS_AS(train::train_sentence(models::SentenceModelConfig::compact(27, 24, 24),
                                        ds, options, bad, 1,
                                        test_util::temp_dir("sent_policy_run").string()),
                  InvalidArgument);
}
