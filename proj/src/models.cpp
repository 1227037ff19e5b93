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

#include "facevsr/models.hpp"

#include <algorithm>
#include <cstdio>

namespace facevsr::models {

std::string stable_hash(const std::string& payload) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : payload) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Tensor clips_to_ncthw(const Tensor& batch) {
  if (batch.rank() != 5)
    throw ShapeMismatch("expected NxTxHxWxC batch, got " + batch.shape_str());
  const int64_t n = batch.dim(0), t = batch.dim(1), h = batch.dim(2),
                w = batch.dim(3), c = batch.dim(4);
  Tensor out({n, c, t, h, w});
  const Scalar* src = batch.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < t; ++s)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          for (int64_t ch = 0; ch < c; ++ch)
            out.data()[(((i * c + ch) * t + s) * h + y) * w + x] =
                src[(((i * t + s) * h + y) * w + x) * c + ch];
  return out;
}

Tensor ncthw_to_clips(const Tensor& x) {
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  Tensor out({n, t, h, w, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t s = 0; s < t; ++s)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t x2 = 0; x2 < w; ++x2)
            out.data()[(((i * t + s) * h + y) * w + x2) * c + ch] =
                x.data()[(((i * c + ch) * t + s) * h + y) * w + x2];
  return out;
}

namespace {

// N×T×F sequence <-> N×F×T×1×1 (the temporal-conv head runs on Conv3d).
Tensor seq_to_nct(const Tensor& seq) {
  const int64_t n = seq.dim(0), t = seq.dim(1), f = seq.dim(2);
  Tensor out({n, f, t, 1, 1});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < t; ++s)
      for (int64_t j = 0; j < f; ++j)
        out.data()[(i * f + j) * t + s] = seq.data()[(i * t + s) * f + j];
  return out;
}

Tensor nct_to_seq(const Tensor& x) {
  const int64_t n = x.dim(0), f = x.dim(1), t = x.dim(2);
  Tensor out({n, t, f});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j)
      for (int64_t s = 0; s < t; ++s)
        out.data()[(i * t + s) * f + j] = x.data()[(i * f + j) * t + s];
  return out;
}

// N×C×T×H×W -> N×T×(C·H·W) per-frame flatten (and its inverse).
Tensor frames_flatten(const Tensor& x) {
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), hw = x.dim(3) * x.dim(4);
  Tensor out({n, t, c * hw});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t s = 0; s < t; ++s)
        std::copy(x.data() + ((i * c + ch) * t + s) * hw,
                  x.data() + ((i * c + ch) * t + s + 1) * hw,
                  out.data() + (i * t + s) * (c * hw) + ch * hw);
  return out;
}

Tensor frames_unflatten(const Tensor& seq, const std::vector<int64_t>& shape) {
  const int64_t n = shape[0], c = shape[1], t = shape[2], hw = shape[3] * shape[4];
  Tensor out(shape);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t s = 0; s < t; ++s)
        std::copy(seq.data() + (i * t + s) * (c * hw) + ch * hw,
                  seq.data() + (i * t + s) * (c * hw) + (ch + 1) * hw,
                  out.data() + ((i * c + ch) * t + s) * hw);
  return out;
}

}  // namespace

// --------------------------------------------------------- WordModelConfig

void WordModelConfig::validate() const {
  if (vocab_size < 2) throw InvalidArgument("vocab_size must be >= 2");
  if (input_h < 8 || input_w < 8) throw InvalidArgument("input must be at least 8x8");
  if (input_c != 1 && input_c != 3) throw InvalidArgument("input_c must be 1 or 3");
  if (frontend_channels < 1 || resnet_blocks < 1 || rnn_hidden < 1 || rnn_layers < 1)
    throw InvalidArgument("invalid word model dimensions");
}

int64_t WordModelConfig::parameter_count() const {
  const int64_t f = frontend_channels;
  int64_t total = f * input_c * frontend_kernel[0] * frontend_kernel[1] * frontend_kernel[2];
  total += 2 * f;  // bn1
  for (int s = 0; s < 4; ++s) {
    const int64_t cin = s == 0 ? f : f << (s - 1);
    const int64_t cout = f << s;
    for (int b = 0; b < resnet_blocks; ++b) {
      const int64_t bin = b == 0 ? cin : cout;
      total += cout * bin * 9 + 2 * cout;    // conv1 + bn1
      total += cout * cout * 9 + 2 * cout;   // conv2 + bn2
      if (b == 0 && s > 0) total += cout * bin + 2 * cout;  // projection shortcut
    }
  }
  const int64_t feat = feature_dim();
  if (backend == WordBackend::kBiGru) {
    const int64_t k = rnn_hidden;
    const int64_t dirs = bidirectional ? 2 : 1;
    int64_t in = feat;
    for (int l = 0; l < rnn_layers; ++l) {
      total += dirs * (3 * k * in + 3 * k * k + 6 * k);
      in = dirs * k;
    }
    total += static_cast<int64_t>(vocab_size) * in + vocab_size;
  } else {
    const int64_t out = 2 * feat;
    total += out * feat * tconv_kernel;  // conv1d, no bias (bn follows)
    total += 2 * out;
    total += static_cast<int64_t>(vocab_size) * out + vocab_size;
  }
  return total;
}

nlohmann::json WordModelConfig::to_json() const {
  return {{"type", "word"},
          {"vocab_size", vocab_size},
          {"input", {input_h, input_w, input_c}},
          {"frontend_channels", frontend_channels},
          {"frontend_kernel", frontend_kernel},
          {"frontend_stride", frontend_stride},
          {"resnet_blocks", resnet_blocks},
          {"rnn_hidden", rnn_hidden},
          {"rnn_layers", rnn_layers},
          {"bidirectional", bidirectional},
          {"backend", backend == WordBackend::kBiGru ? "bigru" : "tconv"},
          {"tconv_kernel", tconv_kernel}};
}

WordModelConfig WordModelConfig::from_json(const nlohmann::json& j) {
  WordModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.input_h = j.at("input").at(0).get<int>();
  c.input_w = j.at("input").at(1).get<int>();
  c.input_c = j.at("input").at(2).get<int>();
  c.frontend_channels = j.value("frontend_channels", 64);
  if (j.contains("frontend_kernel")) c.frontend_kernel = j.at("frontend_kernel").get<std::array<int, 3>>();
  if (j.contains("frontend_stride")) c.frontend_stride = j.at("frontend_stride").get<std::array<int, 3>>();
  c.resnet_blocks = j.value("resnet_blocks", 2);
  c.rnn_hidden = j.value("rnn_hidden", 1024);
  c.rnn_layers = j.value("rnn_layers", 2);
  c.bidirectional = j.value("bidirectional", true);
  c.backend = j.value("backend", "bigru") == std::string("tconv") ? WordBackend::kTemporalConv
                                                                   : WordBackend::kBiGru;
  c.tconv_kernel = j.value("tconv_kernel", 5);
  c.validate();
  return c;
}

std::string WordModelConfig::config_hash() const {
  // The backend choice changes across training stages but the checkpoints
  // must stay transferable, so it is not part of the identity.
  nlohmann::json j = to_json();
  j.erase("backend");
  return stable_hash(j.dump());
}

WordModelConfig WordModelConfig::paper_default(int vocab_size) {
  WordModelConfig c;
  c.vocab_size = vocab_size;
  c.validate();
  if (c.feature_dim() != 512 || c.rnn_layers != 2 || c.resnet_depth() != 18)
    throw InvalidArgument("paper_default invariants violated");
  return c;
}

WordModelConfig WordModelConfig::compact(int vocab_size, int input_h, int input_w,
                                         int channels, int hidden) {
  WordModelConfig c;
  c.vocab_size = vocab_size;
  c.input_h = input_h;
  c.input_w = input_w;
  c.frontend_channels = channels;
  c.resnet_blocks = 1;
  c.rnn_hidden = hidden;
  c.validate();
  return c;
}

// ------------------------------------------------------------ BasicBlock2d

BasicBlock2d::BasicBlock2d(int in_channels, int out_channels, int spatial_stride,
                           Rng& rng)
    : conv1_(in_channels, out_channels, {1, 3, 3}, {1, spatial_stride, spatial_stride},
             {0, 1, 1}, rng, /*bias=*/false),
      bn1_(out_channels),
      conv2_(out_channels, out_channels, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}, rng, false),
      bn2_(out_channels) {
  if (spatial_stride != 1 || in_channels != out_channels) {
    down_conv_ = std::make_unique<Conv3d>(in_channels, out_channels,
                                          std::array<int, 3>{1, 1, 1},
                                          std::array<int, 3>{1, spatial_stride, spatial_stride},
                                          std::array<int, 3>{0, 0, 0}, rng, false);
    down_bn_ = std::make_unique<BatchNorm>(out_channels);
  }
}

Tensor BasicBlock2d::forward(const Tensor& x, Context& ctx) {
  Tensor main = relu1_.forward(bn1_.forward(conv1_.forward(x, ctx), ctx), ctx);
  main = bn2_.forward(conv2_.forward(main, ctx), ctx);
  Tensor shortcut = down_conv_ ? down_bn_->forward(down_conv_->forward(x, ctx), ctx) : x;
  main += shortcut;
  return relu2_.forward(main, ctx);
}

Tensor BasicBlock2d::backward(const Tensor& gy, Context& ctx) {
  Tensor g = relu2_.backward(gy, ctx);
  Tensor g_main = conv1_.backward(
      bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g, ctx), ctx), ctx), ctx), ctx);
  Tensor g_short = down_conv_ ? down_conv_->backward(down_bn_->backward(g, ctx), ctx)
                              : std::move(g);
  g_main += g_short;
  return g_main;
}

void BasicBlock2d::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  conv1_.collect_params(prefix + ".conv1", out);
  bn1_.collect_params(prefix + ".bn1", out);
  conv2_.collect_params(prefix + ".conv2", out);
  bn2_.collect_params(prefix + ".bn2", out);
  if (down_conv_) {
    down_conv_->collect_params(prefix + ".down.conv", out);
    down_bn_->collect_params(prefix + ".down.bn", out);
  }
}

void BasicBlock2d::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
  bn1_.collect_buffers(prefix + ".bn1", out);
  bn2_.collect_buffers(prefix + ".bn2", out);
  if (down_bn_) down_bn_->collect_buffers(prefix + ".down.bn", out);
}

void BasicBlock2d::set_frozen(bool frozen) {
  bn1_.set_frozen(frozen);
  bn2_.set_frozen(frozen);
  if (down_bn_) down_bn_->set_frozen(frozen);
}

// --------------------------------------------------------------- WordModel

WordModel::WordModel(WordModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(Rng::mix(seed, 0x3DE1u));

  conv1_ = std::make_unique<Conv3d>(cfg_.input_c, cfg_.frontend_channels,
                                    cfg_.frontend_kernel, cfg_.frontend_stride,
                                    std::array<int, 3>{cfg_.frontend_kernel[0] / 2,
                                                       cfg_.frontend_kernel[1] / 2,
                                                       cfg_.frontend_kernel[2] / 2},
                                    rng, /*bias=*/false);
  bn1_ = std::make_unique<BatchNorm>(cfg_.frontend_channels);
  pool1_ = std::make_unique<MaxPool3d>(std::array<int, 3>{1, 3, 3},
                                       std::array<int, 3>{1, 2, 2},
                                       std::array<int, 3>{0, 1, 1});
  for (int s = 0; s < 4; ++s) {
    const int cin = s == 0 ? cfg_.frontend_channels : cfg_.frontend_channels << (s - 1);
    const int cout = cfg_.frontend_channels << s;
    for (int b = 0; b < cfg_.resnet_blocks; ++b)
      blocks_.push_back(std::make_unique<BasicBlock2d>(
          b == 0 ? cin : cout, cout, (b == 0 && s > 0) ? 2 : 1, rng));
  }

  if (cfg_.backend == WordBackend::kBiGru) {
    gru_ = std::make_unique<Gru>(cfg_.feature_dim(), cfg_.rnn_hidden, cfg_.rnn_layers,
                                 cfg_.bidirectional, rng);
    fc_ = std::make_unique<Linear>(gru_->output_size(), cfg_.vocab_size, rng);
  } else {
    const int feat = cfg_.feature_dim();
    tconv_ = std::make_unique<Conv3d>(feat, 2 * feat,
                                      std::array<int, 3>{cfg_.tconv_kernel, 1, 1},
                                      std::array<int, 3>{1, 1, 1},
                                      std::array<int, 3>{cfg_.tconv_kernel / 2, 0, 0},
                                      rng, false);
    tbn_ = std::make_unique<BatchNorm>(2 * feat);
    fc_ = std::make_unique<Linear>(2 * feat, cfg_.vocab_size, rng);
  }
}

Tensor WordModel::frontend_forward(const Tensor& ncthw, Context& ctx) {
  Tensor h = pool1_->forward(
      relu1_.forward(bn1_->forward(conv1_->forward(ncthw, ctx), ctx), ctx), ctx);
  for (auto& b : blocks_) h = b->forward(h, ctx);
  pooled_shape_ = h.shape();
  return spatial_avg_pool(h);  // N×T×feature
}

Tensor WordModel::frontend_backward(const Tensor& gfeat, Context& ctx) {
  Tensor g = spatial_avg_pool_backward(gfeat, pooled_shape_);
  for (size_t i = blocks_.size(); i-- > 0;) g = blocks_[i]->backward(g, ctx);
  g = conv1_->backward(
      bn1_->backward(relu1_.backward(pool1_->backward(g, ctx), ctx), ctx), ctx);
  return g;
}

Tensor WordModel::forward(const Tensor& batch, Context& ctx) {
  if (batch.rank() != 5 || batch.dim(2) != cfg_.input_h ||
      batch.dim(3) != cfg_.input_w || batch.dim(4) != cfg_.input_c)
    throw ShapeMismatch("word model input " + batch.shape_str());

  Tensor feat = frontend_forward(clips_to_ncthw(batch), ctx);
  seq_len_ = feat.dim(1);

  if (cfg_.backend == WordBackend::kBiGru) {
    Tensor g = gru_->forward(feat, ctx);
    return fc_->forward(temporal_mean(g), ctx);
  }
  Tensor h = trelu_.forward(tbn_->forward(tconv_->forward(seq_to_nct(feat), ctx), ctx), ctx);
  return fc_->forward(temporal_mean(nct_to_seq(h)), ctx);
}

Tensor WordModel::backward(const Tensor& dlogits, Context& ctx) {
  Tensor g = fc_->backward(dlogits, ctx);
  Tensor gfeat;
  if (cfg_.backend == WordBackend::kBiGru) {
    gfeat = gru_->backward(temporal_mean_backward(g, seq_len_), ctx);
  } else {
    Tensor gh = seq_to_nct(temporal_mean_backward(g, seq_len_));
    gfeat = nct_to_seq(tconv_->backward(tbn_->backward(trelu_.backward(gh, ctx), ctx), ctx));
  }
  return ncthw_to_clips(frontend_backward(gfeat, ctx));
}

Tensor WordModel::frontend_features(const Tensor& batch, Context& ctx) {
  return frontend_forward(clips_to_ncthw(batch), ctx);
}

Tensor WordModel::stage_activation(const Tensor& batch, const std::string& layer_id,
                                   Context& ctx) {
  Tensor h = clips_to_ncthw(batch);
  h = relu1_.forward(bn1_->forward(conv1_->forward(h, ctx), ctx), ctx);
  if (layer_id == "frontend.conv1") return h;
  h = pool1_->forward(h, ctx);
  if (layer_id == "frontend.pool1") return h;
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < cfg_.resnet_blocks; ++b)
      h = blocks_[static_cast<size_t>(s * cfg_.resnet_blocks + b)]->forward(h, ctx);
    if (layer_id == "frontend.stage" + std::to_string(s + 1)) return h;
  }
  throw UnknownLayer(layer_id);
}

std::pair<int64_t, int64_t> WordModel::stage_spatial_dims(const std::string& layer_id) const {
  auto d1 = conv1_->out_dims(8, cfg_.input_h, cfg_.input_w);
  if (layer_id == "frontend.conv1") return {d1[1], d1[2]};
  auto d2 = pool1_->out_dims(d1[0], d1[1], d1[2]);
  if (layer_id == "frontend.pool1") return {d2[1], d2[2]};
  int64_t h = d2[1], w = d2[2];
  for (int s = 0; s < 4; ++s) {
    if (s > 0) {
      h = (h + 2 - 3) / 2 + 1;
      w = (w + 2 - 3) / 2 + 1;
    }
    if (layer_id == "frontend.stage" + std::to_string(s + 1)) return {h, w};
  }
  throw UnknownLayer(layer_id);
}

std::vector<NamedParam> WordModel::named_params() {
  std::vector<NamedParam> out;
  conv1_->collect_params("frontend.conv1", out);
  bn1_->collect_params("frontend.bn1", out);
  for (int s = 0; s < 4; ++s)
    for (int b = 0; b < cfg_.resnet_blocks; ++b)
      blocks_[static_cast<size_t>(s * cfg_.resnet_blocks + b)]->collect_params(
          "frontend.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
  if (gru_) gru_->collect_params("backend.gru", out);
  if (tconv_) {
    tconv_->collect_params("backend.tconv", out);
    tbn_->collect_params("backend.tbn", out);
  }
  fc_->collect_params("backend.fc", out);
  return out;
}

std::vector<NamedBuffer> WordModel::named_buffers() {
  std::vector<NamedBuffer> out;
  bn1_->collect_buffers("frontend.bn1", out);
  for (int s = 0; s < 4; ++s)
    for (int b = 0; b < cfg_.resnet_blocks; ++b)
      blocks_[static_cast<size_t>(s * cfg_.resnet_blocks + b)]->collect_buffers(
          "frontend.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
  if (tbn_) tbn_->collect_buffers("backend.tbn", out);
  return out;
}

std::map<std::string, Tensor> WordModel::state_dict() { return collect_state(*this); }

void WordModel::load_state(const std::map<std::string, Tensor>& state, bool strict) {
  size_t matched = 0;
  for (auto& p : named_params()) {
    auto it = state.find(p.name);
    if (it == state.end()) {
      if (strict) throw ConfigMismatch("missing parameter " + p.name);
      continue;
    }
    if (!it->second.same_shape(p.param->value))
      throw ConfigMismatch("shape mismatch for " + p.name);
    p.param->value = it->second;
    ++matched;
  }
  for (auto& b : named_buffers()) {
    auto it = state.find(b.name);
    if (it == state.end()) {
      if (strict) throw ConfigMismatch("missing buffer " + b.name);
      continue;
    }
    if (!it->second.same_shape(*b.tensor))
      throw ConfigMismatch("shape mismatch for " + b.name);
    *b.tensor = it->second;
    ++matched;
  }
  if (strict && matched == 0) throw ConfigMismatch("empty state");
}

size_t WordModel::load_state_prefix(const std::map<std::string, Tensor>& state,
                                    const std::string& prefix) {
  size_t matched = 0;
  for (auto& p : named_params()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    auto it = state.find(p.name);
    if (it == state.end()) throw ConfigMismatch("missing parameter " + p.name);
    if (!it->second.same_shape(p.param->value))
      throw ConfigMismatch("shape mismatch for " + p.name);
    p.param->value = it->second;
    ++matched;
  }
  for (auto& b : named_buffers()) {
    if (b.name.rfind(prefix, 0) != 0) continue;
    auto it = state.find(b.name);
    if (it == state.end()) throw ConfigMismatch("missing buffer " + b.name);
    if (!it->second.same_shape(*b.tensor))
      throw ConfigMismatch("shape mismatch for " + b.name);
    *b.tensor = it->second;
    ++matched;
  }
  return matched;
}

void WordModel::set_frontend_frozen(bool frozen) {
  frontend_frozen_ = frozen;
  bn1_->set_frozen(frozen);
  for (auto& b : blocks_) b->set_frozen(frozen);
  for (auto& p : named_params())
    if (p.name.rfind("frontend.", 0) == 0) p.param->trainable = !frozen;
}

void WordModel::zero_grad() {
  for (auto& p : named_params()) p.param->zero_grad();
}

// ----------------------------------------------------- SentenceModelConfig

void SentenceModelConfig::validate() const {
  if (alphabet_size < 2) throw InvalidArgument("alphabet_size must be >= 2");
  if (input_h < 8 || input_w < 8) throw InvalidArgument("input must be at least 8x8");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must be in [0,1)");
  for (int c : channels)
    if (c < 1) throw InvalidArgument("invalid channel count");
}

nlohmann::json SentenceModelConfig::to_json() const {
  return {{"type", "sentence"},
          {"alphabet_size", alphabet_size},
          {"input", {input_h, input_w, input_c}},
          {"channels", channels},
          {"rnn_hidden", rnn_hidden},
          {"rnn_layers", rnn_layers},
          {"bidirectional", bidirectional},
          {"dropout", dropout}};
}

SentenceModelConfig SentenceModelConfig::from_json(const nlohmann::json& j) {
  SentenceModelConfig c;
  c.alphabet_size = j.at("alphabet_size").get<int>();
  c.input_h = j.at("input").at(0).get<int>();
  c.input_w = j.at("input").at(1).get<int>();
  c.input_c = j.at("input").at(2).get<int>();
  if (j.contains("channels")) c.channels = j.at("channels").get<std::array<int, 3>>();
  c.rnn_hidden = j.value("rnn_hidden", 256);
  c.rnn_layers = j.value("rnn_layers", 2);
  c.bidirectional = j.value("bidirectional", true);
  c.dropout = j.value("dropout", 0.5);
  c.validate();
  return c;
}

std::string SentenceModelConfig::config_hash() const { return stable_hash(to_json().dump()); }

SentenceModelConfig SentenceModelConfig::paper_default(int alphabet_size) {
  SentenceModelConfig c;
  c.alphabet_size = alphabet_size;
  c.validate();
  return c;
}

SentenceModelConfig SentenceModelConfig::compact(int alphabet_size, int input_h, int input_w) {
  SentenceModelConfig c;
  c.alphabet_size = alphabet_size;
  c.input_h = input_h;
  c.input_w = input_w;
  c.channels = {8, 16, 24};
  c.rnn_hidden = 48;
  c.dropout = 0.2;
  c.validate();
  return c;
}

// ------------------------------------------------------------ SentenceModel

namespace {
struct BlockSpec {
  std::array<int, 3> kernel, stride, pad;
};
constexpr BlockSpec kSentenceBlocks[3] = {
    {{3, 5, 5}, {1, 2, 2}, {1, 2, 2}},
    {{3, 5, 5}, {1, 1, 1}, {1, 2, 2}},
    {{3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
};
}  // namespace

SentenceModel::SentenceModel(SentenceModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(Rng::mix(seed, 0x5EA7u));

  int cin = cfg_.input_c;
  for (int i = 0; i < 3; ++i) {
    const auto& bs = kSentenceBlocks[i];
    blocks_[static_cast<size_t>(i)].conv =
        std::make_unique<Conv3d>(cin, cfg_.channels[static_cast<size_t>(i)], bs.kernel,
                                 bs.stride, bs.pad, rng, false);
    blocks_[static_cast<size_t>(i)].bn =
        std::make_unique<BatchNorm>(cfg_.channels[static_cast<size_t>(i)]);
    blocks_[static_cast<size_t>(i)].pool = std::make_unique<MaxPool3d>(
        std::array<int, 3>{1, 2, 2}, std::array<int, 3>{1, 2, 2}, std::array<int, 3>{0, 0, 0});
    blocks_[static_cast<size_t>(i)].drop = std::make_unique<Dropout>(cfg_.dropout);
    cin = cfg_.channels[static_cast<size_t>(i)];
  }

  // Per-frame feature size after the conv stack.
  int64_t h = cfg_.input_h, w = cfg_.input_w;
  for (int i = 0; i < 3; ++i) {
    const auto& bs = kSentenceBlocks[i];
    h = (h + 2 * bs.pad[1] - bs.kernel[1]) / bs.stride[1] + 1;
    w = (w + 2 * bs.pad[2] - bs.kernel[2]) / bs.stride[2] + 1;
    h = (h - 2) / 2 + 1;
    w = (w - 2) / 2 + 1;
  }
  const int64_t feat = cfg_.channels[2] * h * w;

  gru_ = std::make_unique<Gru>(static_cast<int>(feat), cfg_.rnn_hidden, cfg_.rnn_layers,
                               cfg_.bidirectional, rng);
  fc_ = std::make_unique<Linear>(gru_->output_size(), cfg_.alphabet_size + 1, rng);
}

int64_t SentenceModel::temporal_output_len(int64_t t) const {
  for (int i = 0; i < 3; ++i) {
    const auto& bs = kSentenceBlocks[i];
    t = (t + 2 * bs.pad[0] - bs.kernel[0]) / bs.stride[0] + 1;  // conv
    t = (t - 1) / 1 + 1;                                        // pool kt=1
  }
  return t;
}

Tensor SentenceModel::conv_features(const Tensor& batch, Context& ctx) {
  if (batch.rank() != 5 || batch.dim(2) != cfg_.input_h ||
      batch.dim(3) != cfg_.input_w || batch.dim(4) != cfg_.input_c)
    throw ShapeMismatch("sentence model input " + batch.shape_str());

  Tensor h = clips_to_ncthw(batch);
  for (auto& b : blocks_) {
    h = b.drop->forward(
        b.pool->forward(b.relu.forward(b.bn->forward(b.conv->forward(h, ctx), ctx), ctx), ctx),
        ctx);
  }
  conv_out_shape_ = h.shape();
  return frames_flatten(h);
}

Tensor SentenceModel::forward(const Tensor& batch, Context& ctx) {
  Tensor seq = conv_features(batch, ctx);
  return fc_->forward(gru_->forward(seq, ctx), ctx);
}

Tensor SentenceModel::backward(const Tensor& dlogits, Context& ctx) {
  Tensor g = gru_->backward(fc_->backward(dlogits, ctx), ctx);
  g = frames_unflatten(g, conv_out_shape_);
  for (size_t i = blocks_.size(); i-- > 0;) {
    auto& b = blocks_[i];
    g = b.conv->backward(
        b.bn->backward(b.relu.backward(b.pool->backward(b.drop->backward(g, ctx), ctx), ctx), ctx),
        ctx);
  }
  return ncthw_to_clips(g);
}

std::vector<NamedParam> SentenceModel::named_params() {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].conv->collect_params("stcnn.block" + std::to_string(i) + ".conv", out);
    blocks_[i].bn->collect_params("stcnn.block" + std::to_string(i) + ".bn", out);
  }
  gru_->collect_params("backend.gru", out);
  fc_->collect_params("backend.fc", out);
  return out;
}

std::vector<NamedBuffer> SentenceModel::named_buffers() {
  std::vector<NamedBuffer> out;
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].bn->collect_buffers("stcnn.block" + std::to_string(i) + ".bn", out);
  return out;
}

std::map<std::string, Tensor> SentenceModel::state_dict() { return collect_state(*this); }

void SentenceModel::load_state(const std::map<std::string, Tensor>& state, bool strict) {
  for (auto& p : named_params()) {
    auto it = state.find(p.name);
    if (it == state.end()) {
      if (strict) throw ConfigMismatch("missing parameter " + p.name);
      continue;
    }
    if (!it->second.same_shape(p.param->value))
      throw ConfigMismatch("shape mismatch for " + p.name);
    p.param->value = it->second;
  }
  for (auto& b : named_buffers()) {
    auto it = state.find(b.name);
    if (it == state.end()) {
      if (strict) throw ConfigMismatch("missing buffer " + b.name);
      continue;
    }
    *b.tensor = it->second;
  }
}

void SentenceModel::zero_grad() {
  for (auto& p : named_params()) p.param->zero_grad();
}

}  // namespace facevsr::models
