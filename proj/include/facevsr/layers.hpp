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

#ifndef FACEVSR_LAYERS_HPP_
#define FACEVSR_LAYERS_HPP_

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "facevsr/rng.hpp"
#include "facevsr/tensor.hpp"

namespace facevsr::models {

enum class Mode { kTrain, kEval };

/// Backward rule applied at every ReLU. Guided backpropagation passes
/// gradient only where the forward activation and the incoming gradient
/// are both positive.
enum class BackpropRule { kStandard, kGuided };

struct Context {
  Mode mode = Mode::kEval;
  BackpropRule rule = BackpropRule::kStandard;
  Rng* rng = nullptr;  // consumed by stochastic layers in train mode
};

struct Parameter {
  std::string name;  // local name within the owning layer
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

struct NamedParam {
  std::string name;  // fully qualified
  Parameter* param;
};
struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Caffe-style layer: forward caches whatever backward needs; backward
/// accumulates parameter gradients and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Context& ctx) = 0;
  virtual Tensor backward(const Tensor& gy, Context& ctx) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<NamedParam>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {}
};

/// 3D convolution over N×C×T×H×W. 2D convolutions are the kt=1 case.
class Conv3d : public Layer {
 public:
  Conv3d(int in_channels, int out_channels, std::array<int, 3> kernel,
         std::array<int, 3> stride, std::array<int, 3> pad, Rng& rng,
         bool bias = true);

  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

  std::array<int64_t, 3> out_dims(int64_t t, int64_t h, int64_t w) const;
  int out_channels() const { return out_channels_; }

 private:
  void im2col(const Scalar* x, int64_t t, int64_t h, int64_t w, Scalar* col) const;
  void col2im(const Scalar* col, int64_t t, int64_t h, int64_t w, Scalar* x) const;

  int in_channels_, out_channels_;
  std::array<int, 3> kernel_, stride_, pad_;
  Parameter weight_, bias_;
  bool has_bias_;
  Tensor x_cache_;
};

/// Per-channel batch normalization over all non-channel dims of N×C×…
/// When frozen, train-mode forward uses the running statistics and leaves
/// them untouched (the behaviour a frozen front-end needs).
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5,
                     Rng* rng = nullptr);

  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) override;

  void set_frozen(bool frozen) { frozen_ = frozen; }

 private:
  int channels_;
  double momentum_, eps_;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  bool frozen_ = false;

  bool used_batch_stats_ = false;
  Tensor xhat_cache_;
  std::vector<double> invstd_cache_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;

 private:
  Tensor mask_;
};

class MaxPool3d : public Layer {
 public:
  MaxPool3d(std::array<int, 3> kernel, std::array<int, 3> stride,
            std::array<int, 3> pad);

  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  std::array<int64_t, 3> out_dims(int64_t t, int64_t h, int64_t w) const;

 private:
  std::array<int, 3> kernel_, stride_, pad_;
  std::vector<int64_t> argmax_;
  std::vector<int64_t> in_shape_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;

 private:
  double rate_;
  Tensor mask_;
};

/// Affine map applied to the last dimension.
class Linear : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng);
  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

  Parameter& weight() { return weight_; }

 private:
  int in_features_, out_features_;
  Parameter weight_, bias_;
  Tensor x_cache_;
};

/// Single-direction GRU over N×T×F sequences (PyTorch gate conventions).
class GruDirection : public Layer {
 public:
  GruDirection(int input_size, int hidden_size, bool reverse, Rng& rng);
  Tensor forward(const Tensor& x, Context& ctx) override;  // N×T×K
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

 private:
  int input_, hidden_;
  bool reverse_;
  Parameter w_ih_, w_hh_, b_ih_, b_hh_;
  Tensor x_cache_, h_cache_, r_cache_, z_cache_, n_cache_, ghn_cache_;
};

/// Stacked (optionally bidirectional) GRU; output is N×T×(K or 2K).
class Gru : public Layer {
 public:
  Gru(int input_size, int hidden_size, int num_layers, bool bidirectional, Rng& rng);
  Tensor forward(const Tensor& x, Context& ctx) override;
  Tensor backward(const Tensor& gy, Context& ctx) override;
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

  int output_size() const { return hidden_ * (bidirectional_ ? 2 : 1); }

 private:
  int hidden_;
  bool bidirectional_;
  std::vector<std::unique_ptr<GruDirection>> fw_, bw_;
};

// ---- free tensor helpers used by the model classes ----

/// N×C×T×H×W → N×T×C mean over the spatial dims.
Tensor spatial_avg_pool(const Tensor& x);
Tensor spatial_avg_pool_backward(const Tensor& gy, const std::vector<int64_t>& in_shape);

/// N×T×F → N×F mean over time.
Tensor temporal_mean(const Tensor& x);
Tensor temporal_mean_backward(const Tensor& gy, int64_t t);

/// Row-wise stable softmax / log-softmax over the last dim.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

/// Mean cross-entropy over the batch; returns loss and d(loss)/d(logits).
std::pair<double, Tensor> cross_entropy(const Tensor& logits,
                                        const std::vector<int>& labels);

}  // namespace facevsr::models

#endif  // FACEVSR_LAYERS_HPP_
