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

#include "facevsr/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace facevsr::models {

namespace {

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

Rng& require_rng(Context& ctx, const char* who) {
  if (!ctx.rng) throw InvalidArgument(std::string(who) + " needs ctx.rng in train mode");
  return *ctx.rng;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// ---------------------------------------------------------------- Conv3d

Conv3d::Conv3d(int in_channels, int out_channels, std::array<int, 3> kernel,
               std::array<int, 3> stride, std::array<int, 3> pad, Rng& rng,
               bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_("weight", Tensor({out_channels, in_channels, kernel[0], kernel[1], kernel[2]})),
      bias_("bias", Tensor({out_channels})),
      has_bias_(bias) {
  // Kaiming-normal for the ReLU family.
  const double fan_in = static_cast<double>(in_channels) * kernel[0] * kernel[1] * kernel[2];
  const double std = std::sqrt(2.0 / fan_in);
  for (int64_t i = 0; i < weight_.value.numel(); ++i)
    weight_.value[i] = rng.normal(0.0, std);
}

std::array<int64_t, 3> Conv3d::out_dims(int64_t t, int64_t h, int64_t w) const {
  auto out = [](int64_t in, int k, int s, int p) {
    return (in + 2 * p - k) / s + 1;
  };
  return {out(t, kernel_[0], stride_[0], pad_[0]),
          out(h, kernel_[1], stride_[1], pad_[1]),
          out(w, kernel_[2], stride_[2], pad_[2])};
}

void Conv3d::im2col(const Scalar* x, int64_t t, int64_t h, int64_t w, Scalar* col) const {
  const auto od = out_dims(t, h, w);
  const int64_t to = od[0], ho = od[1], wo = od[2];
  const int64_t m = to * ho * wo;
  for (int c = 0; c < in_channels_; ++c)
    for (int a = 0; a < kernel_[0]; ++a)
      for (int b = 0; b < kernel_[1]; ++b)
        for (int d = 0; d < kernel_[2]; ++d) {
          Scalar* row = col + ((((static_cast<int64_t>(c) * kernel_[0] + a) * kernel_[1] + b) * kernel_[2]) + d) * m;
          int64_t mi = 0;
          for (int64_t ot = 0; ot < to; ++ot) {
            const int64_t it = ot * stride_[0] - pad_[0] + a;
            const bool t_ok = it >= 0 && it < t;
            for (int64_t oh = 0; oh < ho; ++oh) {
              const int64_t ih = oh * stride_[1] - pad_[1] + b;
              const bool h_ok = t_ok && ih >= 0 && ih < h;
              for (int64_t ow = 0; ow < wo; ++ow, ++mi) {
                const int64_t iw = ow * stride_[2] - pad_[2] + d;
                row[mi] = (h_ok && iw >= 0 && iw < w)
                              ? x[((static_cast<int64_t>(c) * t + it) * h + ih) * w + iw]
                              : 0.0;
              }
            }
          }
        }
}

void Conv3d::col2im(const Scalar* col, int64_t t, int64_t h, int64_t w, Scalar* x) const {
  const auto od = out_dims(t, h, w);
  const int64_t to = od[0], ho = od[1], wo = od[2];
  const int64_t m = to * ho * wo;
  for (int c = 0; c < in_channels_; ++c)
    for (int a = 0; a < kernel_[0]; ++a)
      for (int b = 0; b < kernel_[1]; ++b)
        for (int d = 0; d < kernel_[2]; ++d) {
          const Scalar* row = col + ((((static_cast<int64_t>(c) * kernel_[0] + a) * kernel_[1] + b) * kernel_[2]) + d) * m;
          int64_t mi = 0;
          for (int64_t ot = 0; ot < to; ++ot) {
            const int64_t it = ot * stride_[0] - pad_[0] + a;
            const bool t_ok = it >= 0 && it < t;
            for (int64_t oh = 0; oh < ho; ++oh) {
              const int64_t ih = oh * stride_[1] - pad_[1] + b;
              const bool h_ok = t_ok && ih >= 0 && ih < h;
              for (int64_t ow = 0; ow < wo; ++ow, ++mi) {
                const int64_t iw = ow * stride_[2] - pad_[2] + d;
                if (h_ok && iw >= 0 && iw < w)
                  x[((static_cast<int64_t>(c) * t + it) * h + ih) * w + iw] += row[mi];
              }
            }
          }
        }
}

Tensor Conv3d::forward(const Tensor& x, Context& ctx) {
  if (x.rank() != 5 || x.dim(1) != in_channels_)
    throw ShapeMismatch("Conv3d input " + x.shape_str());
  const int64_t n = x.dim(0), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const auto od = out_dims(t, h, w);
  const int64_t m = od[0] * od[1] * od[2];
  const int64_t k = static_cast<int64_t>(in_channels_) * kernel_[0] * kernel_[1] * kernel_[2];

  x_cache_ = x;
  Tensor out({n, out_channels_, od[0], od[1], od[2]});
  std::vector<Scalar> col(static_cast<size_t>(k * m));
  ConstMatMap wm(weight_.value.data(), out_channels_, k);

  for (int64_t i = 0; i < n; ++i) {
    im2col(x.data() + i * in_channels_ * t * h * w, t, h, w, col.data());
    ConstMatMap cm(col.data(), k, m);
    MatMap om(out.data() + i * out_channels_ * m, out_channels_, m);
    om.noalias() = wm * cm;
    if (has_bias_)
      for (int c = 0; c < out_channels_; ++c)
        om.row(c).array() += bias_.value[c];
  }
  return out;
}

Tensor Conv3d::backward(const Tensor& gy, Context& ctx) {
  const Tensor& x = x_cache_;
  const int64_t n = x.dim(0), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const auto od = out_dims(t, h, w);
  const int64_t m = od[0] * od[1] * od[2];
  const int64_t k = static_cast<int64_t>(in_channels_) * kernel_[0] * kernel_[1] * kernel_[2];

  Tensor gx(x.shape());
  std::vector<Scalar> col(static_cast<size_t>(k * m));
  std::vector<Scalar> gcol(static_cast<size_t>(k * m));
  ConstMatMap wm(weight_.value.data(), out_channels_, k);
  MatMap gwm(weight_.grad.data(), out_channels_, k);

  for (int64_t i = 0; i < n; ++i) {
    ConstMatMap gym(gy.data() + i * out_channels_ * m, out_channels_, m);
    im2col(x.data() + i * in_channels_ * t * h * w, t, h, w, col.data());
    ConstMatMap cm(col.data(), k, m);
    gwm.noalias() += gym * cm.transpose();
    if (has_bias_)
      for (int c = 0; c < out_channels_; ++c)
        bias_.grad[c] += gym.row(c).sum();
    MatMap gcm(gcol.data(), k, m);
    gcm.noalias() = wm.transpose() * gym;
    col2im(gcol.data(), t, h, w, gx.data() + i * in_channels_ * t * h * w);
  }
  return gx;
}

void Conv3d::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight_});
  if (has_bias_) out.push_back({prefix + ".bias", &bias_});
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, double momentum, double eps, Rng*)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_("gamma", Tensor::full({channels}, 1.0)),
      beta_("beta", Tensor({channels})),
      running_mean_({channels}),
      running_var_(Tensor::full({channels}, 1.0)) {}

Tensor BatchNorm::forward(const Tensor& x, Context& ctx) {
  if (x.rank() < 2 || x.dim(1) != channels_)
    throw ShapeMismatch("BatchNorm input " + x.shape_str());
  const int64_t n = x.dim(0), c = x.dim(1);
  int64_t s = 1;
  for (int i = 2; i < x.rank(); ++i) s *= x.dim(i);
  const int64_t per_ch = n * s;

  used_batch_stats_ = ctx.mode == Mode::kTrain && !frozen_;
  Tensor out(x.shape());
  xhat_cache_ = Tensor(x.shape());
  invstd_cache_.assign(static_cast<size_t>(c), 0.0);

  for (int64_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (used_batch_stats_) {
      double sum = 0, sq = 0;
      for (int64_t i = 0; i < n; ++i) {
        const Scalar* p = x.data() + (i * c + ch) * s;
        for (int64_t j = 0; j < s; ++j) {
          sum += p[j];
          sq += p[j] * p[j];
        }
      }
      mean = sum / per_ch;
      var = sq / per_ch - mean * mean;
      if (var < 0) var = 0;
      const double unbiased = per_ch > 1 ? var * per_ch / (per_ch - 1) : var;
      running_mean_[ch] = (1 - momentum_) * running_mean_[ch] + momentum_ * mean;
      running_var_[ch] = (1 - momentum_) * running_var_[ch] + momentum_ * unbiased;
    } else {
      mean = running_mean_[ch];
      var = running_var_[ch];
    }
    const double invstd = 1.0 / std::sqrt(var + eps_);
    invstd_cache_[static_cast<size_t>(ch)] = invstd;
    const double g = gamma_.value[ch], b = beta_.value[ch];
    for (int64_t i = 0; i < n; ++i) {
      const Scalar* p = x.data() + (i * c + ch) * s;
      Scalar* xh = xhat_cache_.data() + (i * c + ch) * s;
      Scalar* o = out.data() + (i * c + ch) * s;
      for (int64_t j = 0; j < s; ++j) {
        xh[j] = (p[j] - mean) * invstd;
        o[j] = g * xh[j] + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& gy, Context& ctx) {
  const int64_t n = gy.dim(0), c = gy.dim(1);
  int64_t s = 1;
  for (int i = 2; i < gy.rank(); ++i) s *= gy.dim(i);
  const int64_t per_ch = n * s;

  Tensor gx(gy.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    const double invstd = invstd_cache_[static_cast<size_t>(ch)];
    const double g = gamma_.value[ch];
    double sum_gy = 0, sum_gy_xhat = 0;
    for (int64_t i = 0; i < n; ++i) {
      const Scalar* gp = gy.data() + (i * c + ch) * s;
      const Scalar* xh = xhat_cache_.data() + (i * c + ch) * s;
      for (int64_t j = 0; j < s; ++j) {
        sum_gy += gp[j];
        sum_gy_xhat += gp[j] * xh[j];
      }
    }
    gamma_.grad[ch] += sum_gy_xhat;
    beta_.grad[ch] += sum_gy;
    for (int64_t i = 0; i < n; ++i) {
      const Scalar* gp = gy.data() + (i * c + ch) * s;
      const Scalar* xh = xhat_cache_.data() + (i * c + ch) * s;
      Scalar* gxp = gx.data() + (i * c + ch) * s;
      for (int64_t j = 0; j < s; ++j) {
        if (used_batch_stats_) {
          gxp[j] = g * invstd *
                   (gp[j] - sum_gy / per_ch - xh[j] * sum_gy_xhat / per_ch);
        } else {
          gxp[j] = g * invstd * gp[j];
        }
      }
    }
  }
  return gx;
}

void BatchNorm::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".gamma", &gamma_});
  out.push_back({prefix + ".beta", &beta_});
}

void BatchNorm::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, Context& ctx) {
  mask_ = Tensor(x.shape());
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const bool pos = x[i] > 0;
    mask_[i] = pos ? 1.0 : 0.0;
    out[i] = pos ? x[i] : 0.0;
  }
  return out;
}

Tensor ReLU::backward(const Tensor& gy, Context& ctx) {
  Tensor gx(gy.shape());
  if (ctx.rule == BackpropRule::kGuided) {
    for (int64_t i = 0; i < gy.numel(); ++i)
      gx[i] = (mask_[i] > 0 && gy[i] > 0) ? gy[i] : 0.0;
  } else {
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] = mask_[i] > 0 ? gy[i] : 0.0;
  }
  return gx;
}

// ------------------------------------------------------------- MaxPool3d

MaxPool3d::MaxPool3d(std::array<int, 3> kernel, std::array<int, 3> stride,
                     std::array<int, 3> pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

std::array<int64_t, 3> MaxPool3d::out_dims(int64_t t, int64_t h, int64_t w) const {
  auto out = [](int64_t in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; };
  return {out(t, kernel_[0], stride_[0], pad_[0]),
          out(h, kernel_[1], stride_[1], pad_[1]),
          out(w, kernel_[2], stride_[2], pad_[2])};
}

Tensor MaxPool3d::forward(const Tensor& x, Context& ctx) {
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const auto od = out_dims(t, h, w);
  in_shape_ = x.shape();
  Tensor out({n, c, od[0], od[1], od[2]});
  argmax_.assign(static_cast<size_t>(out.numel()), -1);

  int64_t oi = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const Scalar* xp = x.data() + (i * c + ch) * t * h * w;
      for (int64_t ot = 0; ot < od[0]; ++ot)
        for (int64_t oh = 0; oh < od[1]; ++oh)
          for (int64_t ow = 0; ow < od[2]; ++ow, ++oi) {
            double best = -std::numeric_limits<double>::infinity();
            int64_t best_idx = -1;
            for (int a = 0; a < kernel_[0]; ++a) {
              const int64_t it = ot * stride_[0] - pad_[0] + a;
              if (it < 0 || it >= t) continue;
              for (int b = 0; b < kernel_[1]; ++b) {
                const int64_t ih = oh * stride_[1] - pad_[1] + b;
                if (ih < 0 || ih >= h) continue;
                for (int d = 0; d < kernel_[2]; ++d) {
                  const int64_t iw = ow * stride_[2] - pad_[2] + d;
                  if (iw < 0 || iw >= w) continue;
                  const int64_t idx = (it * h + ih) * w + iw;
                  if (xp[idx] > best) {
                    best = xp[idx];
                    best_idx = idx;
                  }
                }
              }
            }
            out[oi] = best;
            argmax_[static_cast<size_t>(oi)] = (i * c + ch) * t * h * w + best_idx;
          }
    }
  return out;
}

Tensor MaxPool3d::backward(const Tensor& gy, Context& ctx) {
  Tensor gx(in_shape_);
  for (int64_t i = 0; i < gy.numel(); ++i)
    gx[argmax_[static_cast<size_t>(i)]] += gy[i];
  return gx;
}

// --------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, Context& ctx) {
  if (ctx.mode != Mode::kTrain || rate_ <= 0.0) {
    mask_ = Tensor();
    return x;
  }
  Rng& rng = require_rng(ctx, "Dropout");
  const double keep = 1.0 - rate_;
  mask_ = Tensor(x.shape());
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    mask_[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    out[i] = x[i] * mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& gy, Context& ctx) {
  if (mask_.empty()) return gy;
  Tensor gx(gy.shape());
  for (int64_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * mask_[i];
  return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_("weight", Tensor({out_features, in_features})),
      bias_("bias", Tensor({out_features})) {
  const double bound = std::sqrt(6.0 / (in_features + out_features));
  for (int64_t i = 0; i < weight_.value.numel(); ++i)
    weight_.value[i] = rng.uniform(-bound, bound);
}

Tensor Linear::forward(const Tensor& x, Context& ctx) {
  if (x.dim(x.rank() - 1) != in_features_)
    throw ShapeMismatch("Linear input " + x.shape_str());
  const int64_t rows = x.numel() / in_features_;
  x_cache_ = x;

  std::vector<int64_t> out_shape = x.shape();
  out_shape.back() = out_features_;
  Tensor out(out_shape);

  ConstMatMap xm(x.data(), rows, in_features_);
  ConstMatMap wm(weight_.value.data(), out_features_, in_features_);
  MatMap om(out.data(), rows, out_features_);
  om.noalias() = xm * wm.transpose();
  for (int64_t r = 0; r < rows; ++r)
    for (int c = 0; c < out_features_; ++c) om(r, c) += bias_.value[c];
  return out;
}

Tensor Linear::backward(const Tensor& gy, Context& ctx) {
  const int64_t rows = gy.numel() / out_features_;
  ConstMatMap gym(gy.data(), rows, out_features_);
  ConstMatMap xm(x_cache_.data(), rows, in_features_);
  ConstMatMap wm(weight_.value.data(), out_features_, in_features_);

  MatMap gwm(weight_.grad.data(), out_features_, in_features_);
  gwm.noalias() += gym.transpose() * xm;
  for (int c = 0; c < out_features_; ++c) bias_.grad[c] += gym.col(c).sum();

  Tensor gx(x_cache_.shape());
  MatMap gxm(gx.data(), rows, in_features_);
  gxm.noalias() = gym * wm;
  return gx;
}

void Linear::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight_});
  out.push_back({prefix + ".bias", &bias_});
}

// ------------------------------------------------------------------- GRU

GruDirection::GruDirection(int input_size, int hidden_size, bool reverse, Rng& rng)
    : input_(input_size),
      hidden_(hidden_size),
      reverse_(reverse),
      w_ih_("w_ih", Tensor({3 * hidden_size, input_size})),
      w_hh_("w_hh", Tensor({3 * hidden_size, hidden_size})),
      b_ih_("b_ih", Tensor({3 * hidden_size})),
      b_hh_("b_hh", Tensor({3 * hidden_size})) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (auto* p : {&w_ih_, &w_hh_, &b_ih_, &b_hh_})
    for (int64_t i = 0; i < p->value.numel(); ++i)
      p->value[i] = rng.uniform(-bound, bound);
}

Tensor GruDirection::forward(const Tensor& x, Context& ctx) {
  if (x.rank() != 3 || x.dim(2) != input_)
    throw ShapeMismatch("GRU input " + x.shape_str());
  const int64_t n = x.dim(0), t = x.dim(1);
  const int64_t k = hidden_;

  x_cache_ = x;
  h_cache_ = Tensor({n, t + 1, k});  // h_cache_[:,0,:] is the zero initial state
  r_cache_ = Tensor({n, t, k});
  z_cache_ = Tensor({n, t, k});
  n_cache_ = Tensor({n, t, k});
  ghn_cache_ = Tensor({n, t, k});

  ConstMatMap wih(w_ih_.value.data(), 3 * k, input_);
  ConstMatMap whh(w_hh_.value.data(), 3 * k, k);

  Mat gi(n, 3 * k), gh(n, 3 * k), h_prev(n, k);
  h_prev.setZero();

  Tensor out({n, t, k});
  for (int64_t step = 0; step < t; ++step) {
    const int64_t ts = reverse_ ? t - 1 - step : step;
    Mat xt(n, input_);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t f = 0; f < input_; ++f) xt(i, f) = x.data()[(i * t + ts) * input_ + f];

    gi.noalias() = xt * wih.transpose();
    gh.noalias() = h_prev * whh.transpose();
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < k; ++j) {
        const double r = sigmoid(gi(i, j) + b_ih_.value[j] + gh(i, j) + b_hh_.value[j]);
        const double z = sigmoid(gi(i, k + j) + b_ih_.value[k + j] + gh(i, k + j) + b_hh_.value[k + j]);
        const double ghn = gh(i, 2 * k + j) + b_hh_.value[2 * k + j];
        const double nn = std::tanh(gi(i, 2 * k + j) + b_ih_.value[2 * k + j] + r * ghn);
        const double h = (1.0 - z) * nn + z * h_prev(i, j);
        r_cache_.data()[(i * t + step) * k + j] = r;
        z_cache_.data()[(i * t + step) * k + j] = z;
        n_cache_.data()[(i * t + step) * k + j] = nn;
        ghn_cache_.data()[(i * t + step) * k + j] = ghn;
        h_cache_.data()[(i * (t + 1) + step + 1) * k + j] = h;
        out.data()[(i * t + ts) * k + j] = h;
      }
    }
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < k; ++j) h_prev(i, j) = h_cache_.data()[(i * (t + 1) + step + 1) * k + j];
  }
  return out;
}

Tensor GruDirection::backward(const Tensor& gy, Context& ctx) {
  const int64_t n = x_cache_.dim(0), t = x_cache_.dim(1);
  const int64_t k = hidden_;

  ConstMatMap wih(w_ih_.value.data(), 3 * k, input_);
  ConstMatMap whh(w_hh_.value.data(), 3 * k, k);
  MatMap gwih(w_ih_.grad.data(), 3 * k, input_);
  MatMap gwhh(w_hh_.grad.data(), 3 * k, k);

  Tensor gx(x_cache_.shape());
  Mat dh(n, k);
  dh.setZero();
  Mat dgi(n, 3 * k), dgh(n, 3 * k);

  for (int64_t step = t - 1; step >= 0; --step) {
    const int64_t ts = reverse_ ? t - 1 - step : step;
    // add the output gradient flowing into this step
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < k; ++j) dh(i, j) += gy.data()[(i * t + ts) * k + j];

    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < k; ++j) {
        const double r = r_cache_.data()[(i * t + step) * k + j];
        const double z = z_cache_.data()[(i * t + step) * k + j];
        const double nn = n_cache_.data()[(i * t + step) * k + j];
        const double ghn = ghn_cache_.data()[(i * t + step) * k + j];
        const double h_prev = h_cache_.data()[(i * (t + 1) + step) * k + j];
        const double d = dh(i, j);

        const double dz = d * (h_prev - nn) * z * (1.0 - z);
        const double dn = d * (1.0 - z) * (1.0 - nn * nn);
        const double dr = dn * ghn * r * (1.0 - r);

        dgi(i, j) = dr;
        dgi(i, k + j) = dz;
        dgi(i, 2 * k + j) = dn;
        dgh(i, j) = dr;
        dgh(i, k + j) = dz;
        dgh(i, 2 * k + j) = dn * r;
        dh(i, j) = d * z;  // direct path to h_prev; W_hh path added below
      }
    }

    Mat xt(n, input_), hp(n, k);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t f = 0; f < input_; ++f) xt(i, f) = x_cache_.data()[(i * t + ts) * input_ + f];
      for (int64_t j = 0; j < k; ++j) hp(i, j) = h_cache_.data()[(i * (t + 1) + step) * k + j];
    }

    gwih.noalias() += dgi.transpose() * xt;
    gwhh.noalias() += dgh.transpose() * hp;
    for (int64_t j = 0; j < 3 * k; ++j) {
      b_ih_.grad[j] += dgi.col(j).sum();
      b_hh_.grad[j] += dgh.col(j).sum();
    }

    Mat dxt = dgi * wih;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t f = 0; f < input_; ++f) gx.data()[(i * t + ts) * input_ + f] = dxt(i, f);

    dh.noalias() += dgh * whh;
  }
  return gx;
}

void GruDirection::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w_ih", &w_ih_});
  out.push_back({prefix + ".w_hh", &w_hh_});
  out.push_back({prefix + ".b_ih", &b_ih_});
  out.push_back({prefix + ".b_hh", &b_hh_});
}

Gru::Gru(int input_size, int hidden_size, int num_layers, bool bidirectional, Rng& rng)
    : hidden_(hidden_size), bidirectional_(bidirectional) {
  int in = input_size;
  for (int l = 0; l < num_layers; ++l) {
    fw_.push_back(std::make_unique<GruDirection>(in, hidden_size, false, rng));
    if (bidirectional) bw_.push_back(std::make_unique<GruDirection>(in, hidden_size, true, rng));
    in = output_size();
  }
}

namespace {
Tensor concat_last(const Tensor& a, const Tensor& b) {
  const int64_t n = a.dim(0), t = a.dim(1), ka = a.dim(2), kb = b.dim(2);
  Tensor out({n, t, ka + kb});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < t; ++s) {
      std::copy(a.data() + (i * t + s) * ka, a.data() + (i * t + s + 1) * ka,
                out.data() + (i * t + s) * (ka + kb));
      std::copy(b.data() + (i * t + s) * kb, b.data() + (i * t + s + 1) * kb,
                out.data() + (i * t + s) * (ka + kb) + ka);
    }
  return out;
}
std::pair<Tensor, Tensor> split_last(const Tensor& x, int64_t ka) {
  const int64_t n = x.dim(0), t = x.dim(1), kk = x.dim(2);
  Tensor a({n, t, ka}), b({n, t, kk - ka});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < t; ++s) {
      std::copy(x.data() + (i * t + s) * kk, x.data() + (i * t + s) * kk + ka,
                a.data() + (i * t + s) * ka);
      std::copy(x.data() + (i * t + s) * kk + ka, x.data() + (i * t + s + 1) * kk,
                b.data() + (i * t + s) * (kk - ka));
    }
  return {std::move(a), std::move(b)};
}
}  // namespace

Tensor Gru::forward(const Tensor& x, Context& ctx) {
  Tensor h = x;
  for (size_t l = 0; l < fw_.size(); ++l) {
    Tensor f = fw_[l]->forward(h, ctx);
    if (bidirectional_) {
      Tensor b = bw_[l]->forward(h, ctx);
      h = concat_last(f, b);
    } else {
      h = std::move(f);
    }
  }
  return h;
}

Tensor Gru::backward(const Tensor& gy, Context& ctx) {
  Tensor g = gy;
  for (size_t l = fw_.size(); l-- > 0;) {
    if (bidirectional_) {
      auto [gf, gb] = split_last(g, hidden_);
      Tensor gxf = fw_[l]->backward(gf, ctx);
      Tensor gxb = bw_[l]->backward(gb, ctx);
      gxf += gxb;
      g = std::move(gxf);
    } else {
      g = fw_[l]->backward(g, ctx);
    }
  }
  return g;
}

void Gru::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
  for (size_t l = 0; l < fw_.size(); ++l) {
    fw_[l]->collect_params(prefix + ".l" + std::to_string(l) + ".fw", out);
    if (bidirectional_)
      bw_[l]->collect_params(prefix + ".l" + std::to_string(l) + ".bw", out);
  }
}

// --------------------------------------------------------- free helpers

Tensor spatial_avg_pool(const Tensor& x) {
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), hw = x.dim(3) * x.dim(4);
  Tensor out({n, t, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t s = 0; s < t; ++s) {
        const Scalar* p = x.data() + ((i * c + ch) * t + s) * hw;
        double acc = 0;
        for (int64_t j = 0; j < hw; ++j) acc += p[j];
        out.data()[(i * t + s) * c + ch] = acc / static_cast<double>(hw);
      }
  return out;
}

Tensor spatial_avg_pool_backward(const Tensor& gy, const std::vector<int64_t>& in_shape) {
  const int64_t n = in_shape[0], c = in_shape[1], t = in_shape[2];
  const int64_t hw = in_shape[3] * in_shape[4];
  Tensor gx(in_shape);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t s = 0; s < t; ++s) {
        const double g = gy.data()[(i * t + s) * c + ch] / static_cast<double>(hw);
        Scalar* p = gx.data() + ((i * c + ch) * t + s) * hw;
        for (int64_t j = 0; j < hw; ++j) p[j] = g;
      }
  return gx;
}

Tensor temporal_mean(const Tensor& x) {
  const int64_t n = x.dim(0), t = x.dim(1), f = x.dim(2);
  Tensor out({n, f});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j) {
      double acc = 0;
      for (int64_t s = 0; s < t; ++s) acc += x.data()[(i * t + s) * f + j];
      out.data()[i * f + j] = acc / static_cast<double>(t);
    }
  return out;
}

Tensor temporal_mean_backward(const Tensor& gy, int64_t t) {
  const int64_t n = gy.dim(0), f = gy.dim(1);
  Tensor gx({n, t, f});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < t; ++s)
      for (int64_t j = 0; j < f; ++j)
        gx.data()[(i * t + s) * f + j] = gy.data()[i * f + j] / static_cast<double>(t);
  return gx;
}

Tensor softmax(const Tensor& logits) {
  const int64_t cols = logits.dim(logits.rank() - 1);
  const int64_t rows = logits.numel() / cols;
  Tensor out(logits.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const Scalar* in = logits.data() + r * cols;
    Scalar* o = out.data() + r * cols;
    double mx = in[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0;
    for (int64_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (int64_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return out;
}

Tensor log_softmax(const Tensor& logits) {
  const int64_t cols = logits.dim(logits.rank() - 1);
  const int64_t rows = logits.numel() / cols;
  Tensor out(logits.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const Scalar* in = logits.data() + r * cols;
    Scalar* o = out.data() + r * cols;
    double mx = in[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0;
    for (int64_t c = 0; c < cols; ++c) z += std::exp(in[c] - mx);
    const double lz = mx + std::log(z);
    for (int64_t c = 0; c < cols; ++c) o[c] = in[c] - lz;
  }
  return out;
}

std::pair<double, Tensor> cross_entropy(const Tensor& logits,
                                        const std::vector<int>& labels) {
  const int64_t n = logits.dim(0), v = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeMismatch("cross_entropy: label count mismatch");
  const Tensor lsm = log_softmax(logits);
  Tensor grad(logits.shape());
  double loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    loss -= lsm.data()[i * v + labels[static_cast<size_t>(i)]];
    for (int64_t c = 0; c < v; ++c) {
      const double p = std::exp(lsm.data()[i * v + c]);
      grad.data()[i * v + c] =
          (p - (c == labels[static_cast<size_t>(i)] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

}  // namespace facevsr::models
