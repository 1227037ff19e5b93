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

#include "facevsr/checkpoint.hpp"
#include "facevsr/ctc.hpp"
#include "facevsr/models.hpp"
#include "facevsr/rng.hpp"
#include "oracles.hpp"

using namespace facevsr;
using namespace facevsr::models;

namespace {

Tensor random_batch(Rng& rng, int n, int t, int h, int w) {
  Tensor b({n, t, h, w, 1});
  for (int64_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform();
  return b;
}

WordModelConfig tiny_word() {
  return WordModelConfig::compact(2, 8, 8, /*channels=*/2, /*hidden=*/3);
}

}  // namespace

TEST_CASE("word_forward: probabilities form a distribution") {
  WordModelConfig cfg = WordModelConfig::compact(5, 16, 16, 4, 6);
  WordModel model(cfg, 1);
  Context ctx;
  Rng rng(2);
  const Tensor batch = random_batch(rng, 3, 4, 16, 16);
  const Tensor logits = model.forward(batch, ctx);
  REQUIRE(logits.shape() == std::vector<int64_t>{3, 5});
  const Tensor probs = softmax(logits);
  for (int64_t i = 0; i < 3; ++i) {
    double sum = 0;
    for (int64_t c = 0; c < 5; ++c) {
      CHECK(probs.at({i, c}) >= 0.0);
      CHECK(probs.at({i, c}) <= 1.0);
      sum += probs.at({i, c});
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("word_forward: batch permutation equivariance") {
  WordModelConfig cfg = WordModelConfig::compact(4, 12, 12, 4, 5);
  WordModel model(cfg, 3);
  Context ctx;
  Rng rng(4);
  const Tensor batch = random_batch(rng, 4, 3, 12, 12);

  const Tensor out = model.forward(batch, ctx);
  Tensor permuted(batch.shape());
  const int64_t clip = batch.numel() / 4;
  for (int64_t i = 0; i < 4; ++i)
    std::copy(batch.data() + i * clip, batch.data() + (i + 1) * clip,
              permuted.data() + (3 - i) * clip);
  const Tensor out_p = model.forward(permuted, ctx);
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t c = 0; c < 4; ++c)
      CHECK(out_p.at({3 - i, c}) == out.at({i, c}));
}

TEST_CASE("word_forward: zero readout gives the uniform distribution") {
  WordModelConfig cfg = WordModelConfig::compact(8, 12, 12, 2, 4);
  WordModel model(cfg, 5);
  for (auto& p : model.named_params())
    if (p.name.rfind("backend.fc", 0) == 0) p.param->value.fill(0.0);

  Context ctx;
  Rng rng(6);
  const Tensor batch = random_batch(rng, 2, 3, 12, 12);
  const Tensor probs = softmax(model.forward(batch, ctx));
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t c = 0; c < 8; ++c)
      CHECK(probs.at({i, c}) == doctest::Approx(1.0 / 8).epsilon(1e-9));
}

TEST_CASE("word model rejects wrong input shapes") {
  WordModel model(tiny_word(), 1);
  Context ctx;
  Tensor bad({1, 3, 9, 8, 1});
  CHECK_THROWS_AS(model.forward(bad, ctx), ShapeMismatch);
}

TEST_CASE("frontend_features: 512-d with the default stem width") {
  // 64-channel stem => 8*64 = 512 features per frame, whatever the input size
  WordModelConfig cfg = WordModelConfig::compact(3, 8, 8, 64, 4);
  CHECK(cfg.feature_dim() == 512);
  WordModel model(cfg, 7);
  Context ctx;
  Rng rng(8);
  const Tensor batch = random_batch(rng, 1, 3, 8, 8);
  const Tensor feat = model.frontend_features(batch, ctx);
  REQUIRE(feat.rank() == 3);
  CHECK(feat.dim(1) == 3);  // T' = T
  CHECK(feat.dim(2) == 512);
}

TEST_CASE("frontend_features: constant input gives time-constant features") {
  WordModel model(tiny_word(), 9);
  Context ctx;
  Tensor batch({1, 5, 8, 8, 1});
  batch.fill(0.0);
  const Tensor feat = model.frontend_features(batch, ctx);
  for (int64_t t = 1; t < feat.dim(1); ++t)
    for (int64_t f = 0; f < feat.dim(2); ++f)
      CHECK(feat.at({0, t, f}) == feat.at({0, 0, f}));
}

TEST_CASE("frontend_features: temporal receptive field bounds information flow") {
  WordModel model(tiny_word(), 11);
  Context ctx;
  Rng rng(12);
  const int t_len = 9, k = 6;  // clips differ from frame 6 onwards
  Tensor a = random_batch(rng, 1, t_len, 8, 8);
  Tensor b = a;
  for (int64_t t = k; t < t_len; ++t)
    for (int64_t i = 0; i < 64; ++i)
      b.data()[t * 64 + i] = 1.0 - b.data()[t * 64 + i];

  const Tensor fa = model.frontend_features(a, ctx);
  const Tensor fb = model.frontend_features(b, ctx);
  // conv kernel 5 (pad 2): step t sees frames [t-2, t+2]; steps t <= k-3
  // cannot see the change
  for (int64_t t = 0; t <= k - 3; ++t)
    for (int64_t f = 0; f < fa.dim(2); ++f)
      CHECK(fa.at({0, t, f}) == fb.at({0, t, f}));
  bool changed = false;
  for (int64_t f = 0; f < fa.dim(2) && !changed; ++f)
    changed = fa.at({0, t_len - 1, f}) != fb.at({0, t_len - 1, f});
  CHECK(changed);
}

TEST_CASE("sentence_forward: rows are distributions; T' formula matches") {
  SentenceModelConfig cfg = SentenceModelConfig::compact(4, 24, 24);
  cfg.dropout = 0.0;
  SentenceModel model(cfg, 13);
  Context ctx;
  Rng rng(14);
  for (int t_len : {4, 7, 12}) {
    Tensor batch({1, t_len, 24, 24, 1});
    for (int64_t i = 0; i < batch.numel(); ++i) batch[i] = rng.uniform();
    const Tensor logits = model.forward(batch, ctx);
    CHECK(logits.dim(1) == model.temporal_output_len(t_len));
    const Tensor probs = softmax(logits);
    for (int64_t t = 0; t < probs.dim(1); ++t) {
      double sum = 0;
      for (int64_t c = 0; c < probs.dim(2); ++c) sum += probs.at({0, t, c});
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("sentence conv stack: end padding leaves early steps bit-identical") {
  SentenceModelConfig cfg = SentenceModelConfig::compact(3, 16, 16);
  cfg.dropout = 0.0;
  SentenceModel model(cfg, 15);
  Context ctx;
  Rng rng(16);

  const int t_len = 10, pad = 3;
  Tensor clip({1, t_len, 16, 16, 1});
  for (int64_t i = 0; i < clip.numel(); ++i) clip[i] = rng.uniform();
  Tensor padded({1, t_len + pad, 16, 16, 1});
  padded.fill(0.5);  // uniform (blank) frames appended
  std::copy(clip.data(), clip.data() + clip.numel(), padded.data());

  const Tensor fa = model.conv_features(clip, ctx);
  const Tensor fb = model.conv_features(padded, ctx);
  // three kt=3 convs: temporal receptive field radius 3
  for (int64_t t = 0; t + 3 < t_len - 1; ++t)
    for (int64_t f = 0; f < fa.dim(2); ++f)
      CHECK(fa.at({0, t, f}) == fb.at({0, t, f}));
}

TEST_CASE("parameter_count matches the constructed models") {
  for (auto cfg : {tiny_word(), WordModelConfig::compact(10, 16, 16, 4, 8)}) {
    WordModel model(cfg, 1);
    int64_t actual = 0;
    for (auto& p : model.named_params()) actual += p.param->value.numel();
    CHECK(actual == cfg.parameter_count());
  }
  WordModelConfig tcfg = tiny_word();
  tcfg.backend = WordBackend::kTemporalConv;
  WordModel tmodel(tcfg, 1);
  int64_t actual = 0;
  for (auto& p : tmodel.named_params()) actual += p.param->value.numel();
  CHECK(actual == tcfg.parameter_count());
}

TEST_CASE("parameter count of the 18-layer word network (regression guard)") {
  const WordModelConfig cfg = WordModelConfig::paper_default(500);
  CHECK(cfg.feature_dim() == 512);
  CHECK(cfg.resnet_depth() == 18);
  CHECK(cfg.parameter_count() == 40543412);
  WordModel model(cfg, 1);
  int64_t actual = 0;
  for (auto& p : model.named_params()) actual += p.param->value.numel();
  CHECK(actual == cfg.parameter_count());
}

TEST_CASE("determinism: same seed, same parameters, bit-stable forward") {
  const WordModelConfig cfg = tiny_word();
  WordModel m1(cfg, 42), m2(cfg, 42);
  auto p1 = m1.named_params(), p2 = m2.named_params();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i)
    for (int64_t j = 0; j < p1[i].param->value.numel(); ++j)
      CHECK(p1[i].param->value[j] == p2[i].param->value[j]);

  Context ctx;
  Rng rng(17);
  const Tensor batch = random_batch(rng, 2, 3, 8, 8);
  const Tensor a = m1.forward(batch, ctx);
  const Tensor b = m1.forward(batch, ctx);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("checkpoint: save/load round-trips forward outputs bitwise") {
  const auto dir = std::filesystem::temp_directory_path() / "facevsr_ckpt_test";
  std::filesystem::create_directories(dir);
  const WordModelConfig cfg = tiny_word();
  WordModel model(cfg, 19);
  Context ctx;
  Rng rng(20);
  const Tensor batch = random_batch(rng, 1, 3, 8, 8);
  const Tensor before = model.forward(batch, ctx);

  Checkpoint ckpt;
  ckpt.arrays = model.state_dict();
  ckpt.config_hash = cfg.config_hash();
  ckpt.stage = "III";
  ckpt.epoch = 7;
  ckpt.metrics = {{"val_accuracy", 0.5}};
  ckpt.save((dir / "w").string());

  const Checkpoint loaded = Checkpoint::load((dir / "w").string());
  CHECK(loaded.config_hash == cfg.config_hash());
  CHECK(loaded.stage == "III");
  CHECK(loaded.epoch == 7);

  WordModel fresh(cfg, 999);  // different init
  fresh.load_state(loaded.arrays, true);
  const Tensor after = fresh.forward(batch, ctx);
  for (int64_t i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("checkpoint: strict load rejects missing params; prefix filter works") {
  const WordModelConfig cfg = tiny_word();
  WordModel model(cfg, 1);
  auto state = model.state_dict();
  state.erase("backend.fc.weight");
  WordModel other(cfg, 2);
  CHECK_THROWS_AS(other.load_state(state, true), ConfigMismatch);

  const auto before = other.state_dict();
  const size_t n = other.load_state_prefix(state, "frontend.");
  CHECK(n > 0);
  const auto after = other.state_dict();
  for (const auto& [name, t] : after) {
    if (name.rfind("frontend.", 0) == 0) continue;
    const auto& b = before.at(name);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == b[i]);
  }
}

// --------------------------------------------------------------- gradients

namespace {

void word_gradcheck(WordModelConfig cfg, uint64_t seed) {
  WordModel model(cfg, seed);
  Rng rng(seed + 1);
  const Tensor batch = random_batch(rng, 2, 3, cfg.input_h, cfg.input_w);
  const std::vector<int> labels{0, 1};

  Context ctx;
  ctx.mode = Mode::kTrain;

  auto loss_fn = [&]() {
    Context c;
    c.mode = Mode::kTrain;
    const Tensor logits = model.forward(batch, c);
    return cross_entropy(logits, labels).first;
  };

  model.zero_grad();
  const Tensor logits = model.forward(batch, ctx);
  auto [loss, dlogits] = cross_entropy(logits, labels);
  model.backward(dlogits, ctx);

  const double h = 1e-5;
  int64_t checked = 0;
  double worst = 0;
  for (auto& np : model.named_params()) {
    for (int64_t i = 0; i < np.param->value.numel(); ++i) {
      const double saved = np.param->value[i];
      np.param->value[i] = saved + h;
      const double up = loss_fn();
      np.param->value[i] = saved - h;
      const double dn = loss_fn();
      np.param->value[i] = saved;
      const double numeric = (up - dn) / (2 * h);
      const double analytic = np.param->grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  INFO("checked " << checked << " parameters, worst rel err " << worst);
  CHECK(checked > 1000);
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("gradient check: tiny BiGRU word model (8x8, T=3, 2 classes)") {
  word_gradcheck(tiny_word(), 23);
}

TEST_CASE("gradient check: temporal-conv backend variant") {
  WordModelConfig cfg = tiny_word();
  cfg.backend = WordBackend::kTemporalConv;
  cfg.tconv_kernel = 3;
  word_gradcheck(cfg, 29);
}

TEST_CASE("gradient check: sentence model with CTC loss") {
  SentenceModelConfig cfg = SentenceModelConfig::compact(3, 12, 12);
  cfg.dropout = 0.0;
  cfg.rnn_hidden = 3;
  SentenceModel model(cfg, 31);
  Rng rng(32);
  Tensor batch({1, 4, 12, 12, 1});
  for (int64_t i = 0; i < batch.numel(); ++i) batch[i] = rng.uniform();
  const std::vector<int> target{1, 0};

  Context ctx;
  ctx.mode = Mode::kTrain;

  auto loss_fn = [&]() {
    Context c;
    c.mode = Mode::kTrain;
    Tensor logits = model.forward(batch, c);
    return ctc_loss(logits.reshaped({logits.dim(1), logits.dim(2)}), target).loss;
  };

  model.zero_grad();
  Tensor logits = model.forward(batch, ctx);
  const auto res = ctc_loss(logits.reshaped({logits.dim(1), logits.dim(2)}), target);
  model.backward(res.grad_logits.reshaped({1, logits.dim(1), logits.dim(2)}), ctx);

  const double h = 1e-5;
  double worst = 0;
  for (auto& np : model.named_params()) {
    for (int64_t i = 0; i < np.param->value.numel(); ++i) {
      const double saved = np.param->value[i];
      np.param->value[i] = saved + h;
      const double up = loss_fn();
      np.param->value[i] = saved - h;
      const double dn = loss_fn();
      np.param->value[i] = saved;
      const double rel = std::abs(np.param->grad[i] - (up - dn) / (2 * h)) /
                         std::max(1e-6, std::abs(np.param->grad[i]) +
                                            std::abs((up - dn) / (2 * h)));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

// --------------------------------------------------------------- CTC oracle

TEST_CASE("ctc_loss: equals the exhaustive alignment sum; bounded by Viterbi") {
  Rng rng(37);
  eval::Alphabet ab;
  ab.chars = "ab";
  for (int trial = 0; trial < 50; ++trial) {
    const int t_len = 2 + static_cast<int>(rng.uniform_int(0, 4));
    Tensor logits({t_len, 3});
    for (int64_t i = 0; i < logits.numel(); ++i) logits[i] = rng.uniform(-2, 2);

    std::vector<int> target;
    const int want = static_cast<int>(rng.uniform_int(0, 2));
    for (int i = 0; i < want; ++i) target.push_back(static_cast<int>(rng.uniform_int(0, 1)));
    if (!ctc_target_fits(t_len, target)) continue;

    const auto res = ctc_loss(logits, target);

    const Tensor post = softmax(logits);
    const auto probs = oracles::ctc_labeling_probs(post, ab);
    std::string label;
    for (int c : target) label += ab.chars[static_cast<size_t>(c)];
    const auto it = probs.find(label);
    REQUIRE(it != probs.end());
    CHECK(res.loss == doctest::Approx(-std::log(it->second)).epsilon(1e-9));

    const Tensor lp = log_softmax(logits);
    CHECK(res.loss <= ctc_viterbi_nll(lp, target) + 1e-12);
  }
}

TEST_CASE("ctc_loss: single-frame, single-char case is -log p") {
  Tensor logits({1, 3});
  logits.at({0, 0}) = 0.3;
  logits.at({0, 1}) = -1.2;
  logits.at({0, 2}) = 0.8;
  const auto res = ctc_loss(logits, {0});
  const Tensor lp = log_softmax(logits);
  CHECK(res.loss == doctest::Approx(-lp.at({0, 0})).epsilon(1e-12));

  CHECK_THROWS_AS(ctc_loss(logits, {0, 1}), InvalidArgument);  // does not fit
}
