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

#ifndef FACEVSR_MODELS_HPP_
#define FACEVSR_MODELS_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/layers.hpp"

namespace facevsr::models {

/// Order-independent FNV-1a hex digest used for config identity.
std::string stable_hash(const std::string& payload);

enum class WordBackend { kBiGru, kTemporalConv };

/// Word-level recognizer: a spatiotemporal convolution in front of a 2D
/// residual network producing one pooled feature vector per frame, followed
/// by a recurrent (or, in the early training stages, temporal-convolution)
/// classifier head. The default configuration is the 18-layer network with
/// 512-d per-frame features and a 2-layer bidirectional GRU of 1024 units.
struct WordModelConfig {
  int vocab_size = 500;
  int input_h = 112, input_w = 112, input_c = 1;

  int frontend_channels = 64;  // stem width; the four stages use F,2F,4F,8F
  std::array<int, 3> frontend_kernel{5, 7, 7};
  std::array<int, 3> frontend_stride{1, 2, 2};
  int resnet_blocks = 2;  // basic blocks per stage; 2 gives the 18-layer net

  int rnn_hidden = 1024;
  int rnn_layers = 2;
  bool bidirectional = true;
  WordBackend backend = WordBackend::kBiGru;
  int tconv_kernel = 5;

  int feature_dim() const { return frontend_channels * 8; }
  int resnet_depth() const { return 8 * resnet_blocks + 2; }
  int64_t parameter_count() const;

  void validate() const;
  nlohmann::json to_json() const;
  static WordModelConfig from_json(const nlohmann::json& j);
  std::string config_hash() const;

  static WordModelConfig paper_default(int vocab_size);
  /// Small configuration for gradient checks and desk-scale corpora.
  static WordModelConfig compact(int vocab_size, int input_h, int input_w,
                                 int channels = 8, int hidden = 32);
};

/// One 2D residual basic block applied frame-wise (kt = 1 convolutions).
class BasicBlock2d : public Layer {
 public:
  BasicBlock2d(int in_channels, int out_channels, int spatial_stride, Rng& rng);
  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) override;
  void set_frozen(bool frozen);

 private:
  Conv3d conv1_;
  BatchNorm bn1_;
  ReLU relu1_;
  Conv3d conv2_;
  BatchNorm bn2_;
  std::unique_ptr<Conv3d> down_conv_;
  std::unique_ptr<BatchNorm> down_bn_;
  ReLU relu2_;
};

class WordModel {
 public:
  WordModel(WordModelConfig cfg, uint64_t seed);

  const WordModelConfig& config() const { return cfg_; }

  /// batch: N×T×H×W×C in [0,1] → pre-softmax class scores N×|V|.
  Tensor forward(const Tensor& batch, Context& ctx);
  /// Given d(loss)/d(logits), accumulates parameter grads and returns
  /// d(loss)/d(input) as N×T×H×W×C (the saliency path).
  Tensor backward(const Tensor& dlogits, Context& ctx);

  /// The per-frame pooled feature sequence, N×T'×feature_dim.
  Tensor frontend_features(const Tensor& batch, Context& ctx);

  /// Activation tap for diagnostics; layer ids: frontend.conv1,
  /// frontend.pool1, frontend.stage1..frontend.stage4. Returns N×C×T×H×W.
  Tensor stage_activation(const Tensor& batch, const std::string& layer_id, Context& ctx);
  /// Spatial output size of a tap for the configured input.
  std::pair<int64_t, int64_t> stage_spatial_dims(const std::string& layer_id) const;

  int64_t temporal_output_len(int64_t t) const { return t; }  // all temporal strides are 1

  std::vector<NamedParam> named_params();
  std::vector<NamedBuffer> named_buffers();
  std::map<std::string, Tensor> state_dict();
  void load_state(const std::map<std::string, Tensor>& state, bool strict);
  /// Loads only entries whose name starts with `prefix`; returns the count.
  size_t load_state_prefix(const std::map<std::string, Tensor>& state,
                           const std::string& prefix);
  void set_frontend_frozen(bool frozen);
  void zero_grad();

 private:
  Tensor frontend_forward(const Tensor& ncthw, Context& ctx);
  Tensor frontend_backward(const Tensor& gfeat, Context& ctx);

  WordModelConfig cfg_;
  std::unique_ptr<Conv3d> conv1_;
  std::unique_ptr<BatchNorm> bn1_;
  ReLU relu1_;
  std::unique_ptr<MaxPool3d> pool1_;
  std::vector<std::unique_ptr<BasicBlock2d>> blocks_;

  // BiGRU backend
  std::unique_ptr<Gru> gru_;
  // temporal-convolution backend
  std::unique_ptr<Conv3d> tconv_;
  std::unique_ptr<BatchNorm> tbn_;
  ReLU trelu_;
  std::unique_ptr<Linear> fc_;

  std::vector<int64_t> pooled_shape_;  // N,C,T,H,W entering the spatial pool
  int64_t seq_len_ = 0;
  bool frontend_frozen_ = false;
};

/// Sentence-level recognizer: three spatiotemporal conv+pool blocks, a
/// bidirectional recurrent stack, and per-step distributions over the
/// alphabet plus blank (CTC).
struct SentenceModelConfig {
  int alphabet_size = 27;  // blank excluded; it is emitted as the last column
  int input_h = 100, input_w = 100, input_c = 1;
  std::array<int, 3> channels{32, 64, 96};
  int rnn_hidden = 256;
  int rnn_layers = 2;
  bool bidirectional = true;
  double dropout = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static SentenceModelConfig from_json(const nlohmann::json& j);
  std::string config_hash() const;

  static SentenceModelConfig paper_default(int alphabet_size);
  static SentenceModelConfig compact(int alphabet_size, int input_h, int input_w);
};

class SentenceModel {
 public:
  SentenceModel(SentenceModelConfig cfg, uint64_t seed);

  const SentenceModelConfig& config() const { return cfg_; }

  /// batch N×T×H×W×C → per-step logits N×T'×(A+1), blank last.
  Tensor forward(const Tensor& batch, Context& ctx);
  Tensor backward(const Tensor& dlogits, Context& ctx);

  /// Per-frame features after the conv stack, N×T'×F — the temporally-local
  /// part of the network, before the recurrent layers.
  Tensor conv_features(const Tensor& batch, Context& ctx);

  /// T' as a function of T, from the configured block strides.
  int64_t temporal_output_len(int64_t t) const;

  std::vector<NamedParam> named_params();
  std::vector<NamedBuffer> named_buffers();
  std::map<std::string, Tensor> state_dict();
  void load_state(const std::map<std::string, Tensor>& state, bool strict);
  void zero_grad();

 private:
  SentenceModelConfig cfg_;
  struct Block {
    std::unique_ptr<Conv3d> conv;
    std::unique_ptr<BatchNorm> bn;
    ReLU relu;
    std::unique_ptr<MaxPool3d> pool;
    std::unique_ptr<Dropout> drop;
  };
  std::array<Block, 3> blocks_;
  std::unique_ptr<Gru> gru_;
  std::unique_ptr<Linear> fc_;

  std::vector<int64_t> conv_out_shape_;
};

/// Fixed-layout permutations between the clip layout T,H,W,C (N leading)
/// and the compute layout N,C,T,H,W.
Tensor clips_to_ncthw(const Tensor& batch_nthwc);
Tensor ncthw_to_clips(const Tensor& ncthw);

/// Shared parameter/buffer plumbing.
template <typename ModelT>
std::map<std::string, Tensor> collect_state(ModelT& m) {
  std::map<std::string, Tensor> s;
  for (auto& p : m.named_params()) s[p.name] = p.param->value;
  for (auto& b : m.named_buffers()) s[b.name] = *b.tensor;
  return s;
}

}  // namespace facevsr::models

#endif  // FACEVSR_MODELS_HPP_
