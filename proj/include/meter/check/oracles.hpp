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

// Brute-force reference implementations. They are written as plain loop nests
// straight from the operator definitions and share no code with the kernels.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "meter/kernels.hpp"
#include "meter/tensor.hpp"

namespace meter::oracle {

inline Tensor conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias,
                     std::size_t stride, std::size_t pad) {
  const Shape s = x.shape();
  const Shape k = w.shape();
  const std::size_t Ho = (s.h + 2 * pad - k.h) / stride + 1;
  const std::size_t Wo = (s.w + 2 * pad - k.w) / stride + 1;
  Tensor out(s.n, k.n, Ho, Wo);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t co = 0; co < k.n; ++co)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < k.c; ++ci)
            for (std::size_t ky = 0; ky < k.h; ++ky)
              for (std::size_t kx = 0; kx < k.w; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w)) continue;
                acc += static_cast<double>(x.at(n, ci, iy, ix)) * w.at(co, ci, ky, kx);
              }
          out.at(n, co, oy, ox) = static_cast<float>(acc);
        }
  return out;
}

/// Depthwise convolution assembled from single-channel oracle convolutions.
inline Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias,
                               std::size_t stride, std::size_t pad) {
  const Shape s = x.shape();
  const Shape k = w.shape();
  Tensor out;
  for (std::size_t c = 0; c < s.c; ++c) {
    Tensor xc(s.n, 1, s.h, s.w);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) xc.at(n, 0, y, xx) = x.at(n, c, y, xx);
    Tensor wc(1, 1, k.h, k.w);
    for (std::size_t ky = 0; ky < k.h; ++ky)
      for (std::size_t kx = 0; kx < k.w; ++kx) wc.at(0, 0, ky, kx) = w.at(c, 0, ky, kx);
    std::vector<float> bc;
    if (!bias.empty()) bc.push_back(bias[c]);
    Tensor oc = oracle::conv2d(xc, wc, bc, stride, pad);
    if (c == 0) out = Tensor(s.n, s.c, oc.shape().h, oc.shape().w);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t y = 0; y < oc.shape().h; ++y)
        for (std::size_t xx = 0; xx < oc.shape().w; ++xx) out.at(n, c, y, xx) = oc.at(n, 0, y, xx);
  }
  return out;
}

/// Transposed convolution by scattering every input pixel through the kernel.
inline Tensor transposed_conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias,
                                std::size_t stride) {
  const Shape s = x.shape();
  const Shape k = w.shape();
  const std::size_t Ho = (s.h - 1) * stride + k.h;
  const std::size_t Wo = (s.w - 1) * stride + k.w;
  std::vector<double> acc(s.n * k.c * Ho * Wo, 0.0);
  auto idx = [&](std::size_t n, std::size_t c, std::size_t y, std::size_t xx) {
    return ((n * k.c + c) * Ho + y) * Wo + xx;
  };
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t ci = 0; ci < s.c; ++ci)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx)
          for (std::size_t co = 0; co < k.c; ++co)
            for (std::size_t ky = 0; ky < k.h; ++ky)
              for (std::size_t kx = 0; kx < k.w; ++kx)
                acc[idx(n, co, y * stride + ky, xx * stride + kx)] +=
                    static_cast<double>(x.at(n, ci, y, xx)) * w.at(ci, co, ky, kx);
  Tensor out(s.n, k.c, Ho, Wo);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t co = 0; co < k.c; ++co)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t xx = 0; xx < Wo; ++xx)
          out.at(n, co, y, xx) = static_cast<float>(acc[idx(n, co, y, xx)] + (bias.empty() ? 0.0 : bias[co]));
  return out;
}

inline Tensor batchnorm(const Tensor& x, std::span<const float> mean, std::span<const float> var,
                        std::span<const float> gamma, std::span<const float> beta, double eps) {
  Tensor out(x.shape());
  const Shape s = x.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx)
          out.at(n, c, y, xx) = static_cast<float>(
              gamma[c] * (x.at(n, c, y, xx) - static_cast<double>(mean[c])) /
                  std::sqrt(static_cast<double>(var[c]) + eps) +
              beta[c]);
  return out;
}

/// Token (n, p, t, d) of a patch sequence read back through explicit pixel enumeration:
/// patch grid cell (gy, gx) holds pixels (gy*ph + py, gx*pw + px).
inline float unfold_entry(const Tensor& x, std::size_t ph, std::size_t pw, std::size_t n,
                          std::size_t p, std::size_t t, std::size_t d) {
  const std::size_t grid_w = x.shape().w / pw;
  const std::size_t py = p / pw;
  const std::size_t px = p % pw;
  const std::size_t gy = t / grid_w;
  const std::size_t gx = t % grid_w;
  return x.at(n, d, gy * ph + py, gx * pw + px);
}

inline PatchSequence linear(const PatchSequence& s, const Tensor& w, std::span<const float> bias) {
  PatchSequence out = s.with_dim(w.shape().n);
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t o = 0; o < w.shape().n; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < s.dim; ++i) acc += static_cast<double>(w.at(o, i, 0, 0)) * s.row(r)[i];
      out.row(r)[o] = static_cast<float>(acc);
    }
  return out;
}

/// Dense attention: explicit score matrix per head, full softmax, weighted value sum.
inline PatchSequence attention(const PatchSequence& s, const Tensor& wq, const Tensor& wk,
                               const Tensor& wv, const Tensor& wo, std::size_t heads,
                               std::span<const float> out_bias) {
  const std::size_t D = s.dim;
  const std::size_t dh = D / heads;
  const std::size_t N = s.tokens;
  auto project = [&](const Tensor& w) {
    std::vector<double> r(s.rows() * D, 0.0);
    for (std::size_t row = 0; row < s.rows(); ++row)
      for (std::size_t o = 0; o < D; ++o)
        for (std::size_t i = 0; i < D; ++i) r[row * D + o] += static_cast<double>(w.at(o, i, 0, 0)) * s.row(row)[i];
    return r;
  };
  const auto Q = project(wq);
  const auto K = project(wk);
  const auto V = project(wv);
  std::vector<double> mixed(s.rows() * D, 0.0);
  for (std::size_t g = 0; g < s.batch * s.area; ++g)
    for (std::size_t h = 0; h < heads; ++h) {
      std::vector<std::vector<double>> score(N, std::vector<double>(N));
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          double dot = 0.0;
          for (std::size_t d = 0; d < dh; ++d) dot += Q[(g * N + i) * D + h * dh + d] * K[(g * N + j) * D + h * dh + d];
          score[i][j] = dot / std::sqrt(static_cast<double>(dh));
        }
      for (std::size_t i = 0; i < N; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < N; ++j) z += std::exp(score[i][j]);
        for (std::size_t j = 0; j < N; ++j)
          for (std::size_t d = 0; d < dh; ++d)
            mixed[(g * N + i) * D + h * dh + d] += std::exp(score[i][j]) / z * V[(g * N + j) * D + h * dh + d];
      }
    }
  PatchSequence out = s.with_dim(D);
  for (std::size_t row = 0; row < s.rows(); ++row)
    for (std::size_t o = 0; o < D; ++o) {
      double acc = out_bias.empty() ? 0.0 : out_bias[o];
      for (std::size_t i = 0; i < D; ++i) acc += static_cast<double>(wo.at(o, i, 0, 0)) * mixed[row * D + i];
      out.row(row)[o] = static_cast<float>(acc);
    }
  return out;
}

inline PatchSequence layernorm(const PatchSequence& s, std::span<const float> gamma,
                               std::span<const float> beta, double eps) {
  PatchSequence out = s;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double sum = 0.0;
    double sq = 0.0;
    for (float v : s.row(r)) sum += v;
    const double mean = sum / static_cast<double>(s.dim);
    for (float v : s.row(r)) sq += (v - mean) * (v - mean);
    const double var = sq / static_cast<double>(s.dim);
    for (std::size_t d = 0; d < s.dim; ++d)
      out.row(r)[d] = static_cast<float>(gamma[d] * (s.row(r)[d] - mean) / std::sqrt(var + eps) + beta[d]);
  }
  return out;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace meter::oracle
