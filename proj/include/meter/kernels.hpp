// Copyright 2026 The meter-rt Authors. All Rights Reserved.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "meter/parallel.hpp"
#include "meter/tensor.hpp"

namespace meter {

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline void check_bias(std::span<const float> bias, std::size_t out_ch, const char* op) {
  if (!bias.empty() && bias.size() != out_ch) {
    throw DimensionError(std::string(op) + ": bias length " + std::to_string(bias.size()) +
                         " does not match " + std::to_string(out_ch) + " output channels");
  }
}

// acc[oy, ox] += w * in[oy*s - p + ky, ox*s - p + kx] over the valid window.
inline void accumulate_tap(double* acc, const float* in, std::size_t H, std::size_t W,
                           std::size_t Ho, std::size_t Wo, std::size_t stride, std::size_t pad,
                           std::size_t ky, std::size_t kx, double w) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  const auto iW = static_cast<std::ptrdiff_t>(W);
  const auto iH = static_cast<std::ptrdiff_t>(H);
  const auto kxs = static_cast<std::ptrdiff_t>(kx);
  std::ptrdiff_t ox_lo = 0;
  while (ox_lo < static_cast<std::ptrdiff_t>(Wo) && ox_lo * s - p + kxs < 0) ++ox_lo;
  std::ptrdiff_t ox_hi = static_cast<std::ptrdiff_t>(Wo);
  while (ox_hi > ox_lo && (ox_hi - 1) * s - p + kxs >= iW) --ox_hi;
  if (ox_lo >= ox_hi) return;
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ky);
    if (iy < 0 || iy >= iH) continue;
    const float* row = in + iy * iW - p + kxs;
    double* out = acc + oy * Wo;
    if (stride == 1) {
      for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) out[ox] += w * static_cast<double>(row[ox]);
    } else {
      for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) {
        out[ox] += w * static_cast<double>(row[ox * s]);
      }
    }
  }
}

inline void store_plane(float* dst, const std::vector<double>& acc) {
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
}

}  // namespace detail

/// Grouped 2-D cross-correlation. weights are (out_ch, in_ch / groups, kh, kw).
inline Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
                     std::size_t stride, std::size_t padding, std::size_t groups = 1) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (groups == 0 || is.c % groups != 0 || ws.n % groups != 0 || ws.c * groups != is.c) {
    throw DimensionError("conv2d: input " + is.str() + " incompatible with weights " + ws.str() +
                         " (groups " + std::to_string(groups) + ")");
  }
  if (ws.h == 0 || ws.w == 0 || is.h + 2 * padding < ws.h || is.w + 2 * padding < ws.w) {
    throw DimensionError("conv2d: kernel " + ws.str() + " does not fit padded input " + is.str());
  }
  detail::check_bias(bias, ws.n, "conv2d");
  const std::size_t Ho = detail::conv_out_extent(is.h, ws.h, stride, padding);
  const std::size_t Wo = detail::conv_out_extent(is.w, ws.w, stride, padding);
  Tensor out(is.n, ws.n, Ho, Wo);
  const std::size_t in_per_group = ws.c;
  const std::size_t out_per_group = ws.n / groups;
  const std::size_t taps = ws.h * ws.w;
  for (std::size_t b = 0; b < is.n; ++b) {
    parallel_for(0, ws.n, [&](std::size_t co) {
      std::vector<double> acc(Ho * Wo, bias.empty() ? 0.0 : static_cast<double>(bias[co]));
      const std::size_t g = co / out_per_group;
      for (std::size_t ci = 0; ci < in_per_group; ++ci) {
        const float* plane = input.channel(b, g * in_per_group + ci).data();
        const float* wk = weights.data().data() + (co * in_per_group + ci) * taps;
        for (std::size_t ky = 0; ky < ws.h; ++ky) {
          for (std::size_t kx = 0; kx < ws.w; ++kx) {
            detail::accumulate_tap(acc.data(), plane, is.h, is.w, Ho, Wo, stride, padding, ky, kx,
                                   wk[ky * ws.w + kx]);
          }
        }
      }
      detail::store_plane(out.channel(b, co).data(), acc);
    });
  }
  return out;
}

/// Depthwise convolution: weights (ch, 1, kh, kw), channel c only sees input channel c.
inline Tensor depthwise_conv2d(const Tensor& input, const Tensor& weights,
                               std::span<const float> bias, std::size_t stride,
                               std::size_t padding) {
  if (weights.shape().n != input.shape().c || weights.shape().c != 1) {
    throw DimensionError("depthwise_conv2d: input " + input.shape().str() +
                         " incompatible with weights " + weights.shape().str());
  }
  return conv2d(input, weights, bias, stride, padding, input.shape().c);
}

/// 1x1 convolution as a per-pixel channel mix.
inline Tensor pointwise_conv2d(const Tensor& input, const Tensor& weights,
                               std::span<const float> bias) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  if (ws.h != 1 || ws.w != 1 || ws.c != is.c) {
    throw DimensionError("pointwise_conv2d: input " + is.str() + " incompatible with weights " +
                         ws.str());
  }
  detail::check_bias(bias, ws.n, "pointwise_conv2d");
  const std::size_t hw = is.plane();
  Tensor out(is.n, ws.n, is.h, is.w);
  for (std::size_t b = 0; b < is.n; ++b) {
    parallel_for(0, ws.n, [&](std::size_t co) {
      std::vector<double> acc(hw, bias.empty() ? 0.0 : static_cast<double>(bias[co]));
      const float* wrow = weights.data().data() + co * ws.c;
      for (std::size_t ci = 0; ci < ws.c; ++ci) {
        const double w = wrow[ci];
        const float* x = input.channel(b, ci).data();
        for (std::size_t i = 0; i < hw; ++i) acc[i] += w * static_cast<double>(x[i]);
      }
      detail::store_plane(out.channel(b, co).data(), acc);
    });
  }
  return out;
}

/// Transposed convolution that exactly doubles resolution. weights are (in_ch, out_ch, 2, 2);
/// any other kernel/stride/padding combination is rejected.
inline Tensor transposed_conv2d(const Tensor& input, const Tensor& weights,
                                std::span<const float> bias, std::size_t stride = 2,
                                std::size_t kernel = 2, std::size_t padding = 0) {
  if (stride != 2 || kernel != 2 || padding != 0) {
    throw ConfigError("transposed_conv2d: only kernel 2, stride 2, padding 0 doubles resolution (got k=" +
                      std::to_string(kernel) + " s=" + std::to_string(stride) +
                      " p=" + std::to_string(padding) + ")");
  }
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  if (ws.n != is.c || ws.h != kernel || ws.w != kernel) {
    throw DimensionError("transposed_conv2d: input " + is.str() + " incompatible with weights " +
                         ws.str());
  }
  detail::check_bias(bias, ws.c, "transposed_conv2d");
  const std::size_t H = is.h;
  const std::size_t W = is.w;
  const std::size_t hw = is.plane();
  Tensor out(is.n, ws.c, 2 * H, 2 * W);
  for (std::size_t b = 0; b < is.n; ++b) {
    parallel_for(0, ws.c, [&](std::size_t co) {
      float* dst = out.channel(b, co).data();
      const double b0 = bias.empty() ? 0.0 : static_cast<double>(bias[co]);
      std::vector<double> acc(hw);
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t c = 0; c < 2; ++c) {
          std::fill(acc.begin(), acc.end(), b0);
          for (std::size_t ci = 0; ci < is.c; ++ci) {
            const double w = weights.at(ci, co, a, c);
            const float* x = input.channel(b, ci).data();
            for (std::size_t i = 0; i < hw; ++i) acc[i] += w * static_cast<double>(x[i]);
          }
          for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
              dst[(2 * y + a) * 2 * W + 2 * x + c] = static_cast<float>(acc[y * W + x]);
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and activations
// ---------------------------------------------------------------------------

inline Tensor batchnorm_inference(const Tensor& input, std::span<const float> mean,
                                  std::span<const float> var, std::span<const float> gamma,
                                  std::span<const float> beta, double eps) {
  const std::size_t C = input.shape().c;
  if (mean.size() != C || var.size() != C || gamma.size() != C || beta.size() != C) {
    throw DimensionError("batchnorm_inference: statistics do not match " + std::to_string(C) +
                         " channels of " + input.shape().str());
  }
  std::vector<double> scale(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (!(var[c] >= 0.0f)) {
      throw ValidationError("batchnorm_inference: negative variance " + std::to_string(var[c]) +
                            " in channel " + std::to_string(c));
    }
    const double denom = std::sqrt(static_cast<double>(var[c]) + eps);
    if (denom == 0.0) {
      throw ValidationError("batchnorm_inference: zero variance with eps 0 in channel " +
                            std::to_string(c));
    }
    scale[c] = static_cast<double>(gamma[c]) / denom;
  }
  Tensor out(input.shape());
  for (std::size_t b = 0; b < input.shape().n; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      auto src = input.channel(b, c);
      auto dst = out.channel(b, c);
      const double m = mean[c];
      const double s = scale[c];
      const double t = beta[c];
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<float>((static_cast<double>(src[i]) - m) * s + t);
      }
    }
  }
  return out;
}

enum class Activation { ReLU, SiLU };

inline float relu(float x) { return x > 0.0f ? x : 0.0f; }
inline float silu(float x) {
  const double v = x;
  return static_cast<float>(v / (1.0 + std::exp(-v)));
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = relu(v);
  return out;
}

inline Tensor silu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = silu(v);
  return out;
}

inline void activate_inplace(std::span<float> values, Activation act) {
  if (act == Activation::ReLU) {
    for (float& v : values) v = relu(v);
  } else {
    for (float& v : values) v = silu(v);
  }
}

inline Tensor activate(const Tensor& input, Activation act) {
  return act == Activation::ReLU ? relu(input) : silu(input);
}

// ---------------------------------------------------------------------------
// Patch sequences
// ---------------------------------------------------------------------------

/// Token view of a feature map split into (ph, pw) patches. Tokens that share the
/// same offset inside their patch form one sequence:
///   data[((b * area + p) * tokens + t) * dim + d]
/// with p = py * pw + px and t = gy * (w / pw) + gx.
struct PatchSequence {
  std::size_t batch = 0;
  std::size_t area = 0;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::size_t ph = 1;
  std::size_t pw = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  [[nodiscard]] std::size_t rows() const { return batch * area * tokens; }
  [[nodiscard]] std::span<float> row(std::size_t r) {
    return std::span<float>(data).subspan(r * dim, dim);
  }
  [[nodiscard]] std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data).subspan(r * dim, dim);
  }
  [[nodiscard]] float& at(std::size_t b, std::size_t p, std::size_t t, std::size_t d) {
    return data[((b * area + p) * tokens + t) * dim + d];
  }
  [[nodiscard]] float at(std::size_t b, std::size_t p, std::size_t t, std::size_t d) const {
    return data[((b * area + p) * tokens + t) * dim + d];
  }

  /// Same geometry, new embedding width, zero filled.
  [[nodiscard]] PatchSequence with_dim(std::size_t new_dim) const {
    PatchSequence s = *this;
    s.dim = new_dim;
    s.data.assign(rows() * new_dim, 0.0f);
    return s;
  }
};

inline PatchSequence unfold(const Tensor& input, std::size_t ph, std::size_t pw) {
  const Shape& s = input.shape();
  if (ph == 0 || pw == 0 || s.h % ph != 0 || s.w % pw != 0) {
    throw DimensionError("unfold: spatial extent " + std::to_string(s.h) + "x" +
                         std::to_string(s.w) + " not divisible by patch " + std::to_string(ph) +
                         "x" + std::to_string(pw));
  }
  PatchSequence seq;
  seq.batch = s.n;
  seq.area = ph * pw;
  seq.tokens = (s.h / ph) * (s.w / pw);
  seq.dim = s.c;
  seq.ph = ph;
  seq.pw = pw;
  seq.height = s.h;
  seq.width = s.w;
  seq.data.resize(s.count());
  const std::size_t gw = s.w / pw;
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
          const std::size_t p = (y % ph) * pw + x % pw;
          const std::size_t t = (y / ph) * gw + x / pw;
          seq.at(b, p, t, c) = input.at(b, c, y, x);
        }
      }
    }
  }
  return seq;
}

inline Tensor fold(const PatchSequence& seq) {
  if (seq.area != seq.ph * seq.pw || seq.height % seq.ph != 0 || seq.width % seq.pw != 0 ||
      seq.tokens * seq.area != seq.height * seq.width || seq.data.size() != seq.rows() * seq.dim) {
    throw DimensionError("fold: inconsistent patch sequence geometry");
  }
  Tensor out(seq.batch, seq.dim, seq.height, seq.width);
  const std::size_t gw = seq.width / seq.pw;
  for (std::size_t b = 0; b < seq.batch; ++b) {
    for (std::size_t c = 0; c < seq.dim; ++c) {
      for (std::size_t y = 0; y < seq.height; ++y) {
        for (std::size_t x = 0; x < seq.width; ++x) {
          const std::size_t p = (y % seq.ph) * seq.pw + x % seq.pw;
          const std::size_t t = (y / seq.ph) * gw + x / seq.pw;
          out.at(b, c, y, x) = seq.at(b, p, t, c);
        }
      }
    }
  }
  return out;
}

/// Token-wise affine map. weights are (out_dim, in_dim, 1, 1).
inline PatchSequence linear(const PatchSequence& seq, const Tensor& weights,
                            std::span<const float> bias) {
  const Shape& ws = weights.shape();
  if (ws.c != seq.dim || ws.h != 1 || ws.w != 1) {
    throw DimensionError("linear: weights " + ws.str() + " do not accept embedding width " +
                         std::to_string(seq.dim));
  }
  detail::check_bias(bias, ws.n, "linear");
  PatchSequence out = seq.with_dim(ws.n);
  const float* W = weights.data().data();
  parallel_for(0, seq.rows(), [&](std::size_t r) {
    const float* x = seq.data.data() + r * seq.dim;
    float* y = out.data.data() + r * ws.n;
    for (std::size_t o = 0; o < ws.n; ++o) {
      const float* w = W + o * ws.c;
      double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
      for (std::size_t i = 0; i < ws.c; ++i) acc += static_cast<double>(w[i]) * x[i];
      y[o] = static_cast<float>(acc);
    }
  });
  return out;
}

inline PatchSequence layernorm(const PatchSequence& seq, std::span<const float> gamma,
                               std::span<const float> beta, double eps) {
  if (gamma.size() != seq.dim || beta.size() != seq.dim) {
    throw DimensionError("layernorm: affine length does not match embedding width " +
                         std::to_string(seq.dim));
  }
  PatchSequence out = seq;
  const auto D = static_cast<double>(seq.dim);
  for (std::size_t r = 0; r < seq.rows(); ++r) {
    auto x = seq.row(r);
    auto y = out.row(r);
    double mean = 0.0;
    for (float v : x) mean += v;
    mean /= D;
    double var = 0.0;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= D;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t d = 0; d < seq.dim; ++d) {
      y[d] = static_cast<float>((x[d] - mean) * inv * gamma[d] + beta[d]);
    }
  }
  return out;
}

/// Softmax rows observed during attention, for inspection in tests.
struct AttentionTrace {
  std::size_t calls = 0;
  double max_row_sum_error = 0.0;
  std::vector<std::vector<double>> first_rows;
};

/// Multi-head self-attention inside each (batch, patch offset) sequence. No positional
/// encoding. Wq/Wk/Wv/Wo are (dim, dim, 1, 1); out_bias is optional.
inline PatchSequence multihead_self_attention(const PatchSequence& seq, const Tensor& wq,
                                              const Tensor& wk, const Tensor& wv,
                                              const Tensor& wo, std::size_t heads,
                                              std::span<const float> out_bias = {},
                                              AttentionTrace* trace = nullptr) {
  if (heads == 0 || seq.dim % heads != 0) {
    throw ConfigError("multihead_self_attention: embedding width " + std::to_string(seq.dim) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  for (const Tensor* w : {&wq, &wk, &wv, &wo}) {
    if (w->shape() != Shape{seq.dim, seq.dim, 1, 1}) {
      throw DimensionError("multihead_self_attention: projection " + w->shape().str() +
                           " does not match width " + std::to_string(seq.dim));
    }
  }
  const PatchSequence q = linear(seq, wq, {});
  const PatchSequence k = linear(seq, wk, {});
  const PatchSequence v = linear(seq, wv, {});
  PatchSequence mixed = seq.with_dim(seq.dim);
  const std::size_t dh = seq.dim / heads;
  const std::size_t N = seq.tokens;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t groups = seq.batch * seq.area;
  std::vector<double> row_errors(groups * heads, 0.0);
  if (trace != nullptr) {
    trace->calls += 1;
    trace->first_rows.clear();
  }
  parallel_for(0, groups * heads, [&](std::size_t gh) {
    const std::size_t g = gh / heads;
    const std::size_t h = gh % heads;
    const std::size_t base = g * N;
    std::vector<double> logits(N);
    std::vector<double> out(dh);
    for (std::size_t i = 0; i < N; ++i) {
      const float* qi = q.data.data() + (base + i) * seq.dim + h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < N; ++j) {
        const float* kj = k.data.data() + (base + j) * seq.dim + h * dh;
        double dot = 0.0;
        for (std::size_t d = 0; d < dh; ++d) dot += static_cast<double>(qi[d]) * kj[d];
        logits[j] = dot * scale;
        mx = std::max(mx, logits[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        sum += logits[j];
      }
      double total = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        logits[j] /= sum;
        total += logits[j];
      }
      row_errors[gh] = std::max(row_errors[gh], std::abs(total - 1.0));
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t j = 0; j < N; ++j) {
        const float* vj = v.data.data() + (base + j) * seq.dim + h * dh;
        const double a = logits[j];
        for (std::size_t d = 0; d < dh; ++d) out[d] += a * vj[d];
      }
      float* dst = mixed.data.data() + (base + i) * seq.dim + h * dh;
      for (std::size_t d = 0; d < dh; ++d) dst[d] = static_cast<float>(out[d]);
      if (trace != nullptr && gh == 0 && i == 0) trace->first_rows.push_back(logits);
    }
  });
  if (trace != nullptr) {
    for (double e : row_errors) trace->max_row_sum_error = std::max(trace->max_row_sum_error, e);
  }
  return linear(mixed, wo, out_bias);
}

inline void add_inplace(PatchSequence& dst, const PatchSequence& src) {
  if (dst.data.size() != src.data.size()) {
    throw DimensionError("add: patch sequences differ in size");
  }
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// ---------------------------------------------------------------------------
// Tensor plumbing
// ---------------------------------------------------------------------------

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError("concat_channels: " + sa.str() + " and " + sb.str() +
                         " differ outside the channel axis");
  }
  Tensor out(sa.n, sa.c + sb.c, sa.h, sa.w);
  for (std::size_t n = 0; n < sa.n; ++n) {
    for (std::size_t c = 0; c < sa.c; ++c) std::ranges::copy(a.channel(n, c), out.channel(n, c).begin());
    for (std::size_t c = 0; c < sb.c; ++c) {
      std::ranges::copy(b.channel(n, c), out.channel(n, sa.c + c).begin());
    }
  }
  return out;
}

inline void add_inplace(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) {
    throw DimensionError("add: " + dst.shape().str() + " vs " + src.shape().str());
  }
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

/// Bilinear resize with half-pixel centres and edge clamping.
inline Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  const Shape& s = input.shape();
  if (out_h == 0 || out_w == 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("resize_bilinear: empty extent");
  }
  Tensor out(s.n, s.c, out_h, out_w);
  const double sy = static_cast<double>(s.h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(s.w) / static_cast<double>(out_w);
  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, n_in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(out_h, s.h, sy);
  const auto tx = taps(out_w, s.w, sx);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* src = input.channel(n, c).data();
      float* dst = out.channel(n, c).data();
      for (std::size_t y = 0; y < out_h; ++y) {
        const float* r0 = src + ty[y].i0 * s.w;
        const float* r1 = src + ty[y].i1 * s.w;
        const double fy = ty[y].f;
        for (std::size_t x = 0; x < out_w; ++x) {
          const double fx = tx[x].f;
          const double top = r0[tx[x].i0] * (1.0 - fx) + r0[tx[x].i1] * fx;
          const double bot = r1[tx[x].i0] * (1.0 - fx) + r1[tx[x].i1] * fx;
          dst[y * out_w + x] = static_cast<float>(top * (1.0 - fy) + bot * fy);
        }
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize sampling the source pixel that contains each output centre.
inline Tensor resize_nearest(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  const Shape& s = input.shape();
  if (out_h == 0 || out_w == 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("resize_nearest: empty extent");
  }
  Tensor out(s.n, s.c, out_h, out_w);
  auto pick = [](std::size_t o, std::size_t n_out, std::size_t n_in) {
    return std::min(n_in - 1, (2 * o + 1) * n_in / (2 * n_out));
  };
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t iy = pick(y, out_h, s.h);
        for (std::size_t x = 0; x < out_w; ++x) {
          out.at(n, c, y, x) = input.at(n, c, iy, pick(x, out_w, s.w));
        }
      }
    }
  }
  return out;
}

/// Extends the bottom and right edges by repeating the last row/column.
inline Tensor pad_replicate(const Tensor& input, std::size_t bottom, std::size_t right) {
  const Shape& s = input.shape();
  if (bottom == 0 && right == 0) return input;
  if (s.h == 0 || s.w == 0) throw DimensionError("pad_replicate: empty input");
  Tensor out(s.n, s.c, s.h + bottom, s.w + right);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h + bottom; ++y) {
        const std::size_t iy = std::min(y, s.h - 1);
        for (std::size_t x = 0; x < s.w + right; ++x) {
          out.at(n, c, y, x) = input.at(n, c, iy, std::min(x, s.w - 1));
        }
      }
    }
  }
  return out;
}

/// Top-left window of the given extent.
inline Tensor crop(const Tensor& input, std::size_t top, std::size_t left, std::size_t h,
                   std::size_t w) {
  const Shape& s = input.shape();
  if (top + h > s.h || left + w > s.w) {
    throw DimensionError("crop: window exceeds " + s.str());
  }
  Tensor out(s.n, s.c, h, w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) out.at(n, c, y, x) = input.at(n, c, top + y, left + x);
      }
    }
  }
  return out;
}

inline void clamp_inplace(Tensor& t, float lo, float hi) {
  for (float& v : t.data()) v = std::clamp(v, lo, hi);
}

}  // namespace meter
