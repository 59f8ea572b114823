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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "meter/kernels.hpp"
#include "meter/random.hpp"
#include "meter/sample.hpp"
#include "meter/tensor.hpp"

namespace meter {

inline constexpr double kShiftFactorMin = 0.9;
inline constexpr double kShiftFactorMax = 1.1;

/// Photometric (C) shift: rgb_aug = clamp(beta * rgb^gamma * eta_c, 0, 1).
inline Tensor c_shift(const Tensor& rgb, double beta, double gamma, std::array<double, 3> eta) {
  auto in_range = [](double v) { return v >= kShiftFactorMin && v <= kShiftFactorMax; };
  if (!in_range(beta) || !in_range(gamma) || !std::ranges::all_of(eta, in_range)) {
    throw ValidationError("c_shift: beta, gamma and eta must lie in [0.9, 1.1]");
  }
  if (rgb.shape().c != 3) throw DimensionError("c_shift: expected 3 channels, got " + rgb.shape().str());
  Tensor out(rgb.shape());
  for (std::size_t n = 0; n < rgb.shape().n; ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      auto src = rgb.channel(n, c);
      auto dst = out.channel(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        const double x = src[i];
        const double g = gamma == 1.0 ? x : std::pow(x, gamma);
        dst[i] = static_cast<float>(std::clamp(beta * g * eta[c], 0.0, 1.0));
      }
    }
  }
  return out;
}

/// Depth (D) shift: adds one scalar to every valid pixel and clamps to [0, max_depth].
/// Pixels at 0 (missing measurements) stay 0.
inline Tensor d_shift(const Tensor& depth, double shift_m, double max_depth,
                      SceneUnit unit = SceneUnit::IndoorCm) {
  const double bound = max_depth_shift(unit);
  if (!(std::abs(shift_m) <= bound)) {
    throw ValidationError("d_shift: |shift| " + std::to_string(shift_m) + " m exceeds " +
                          std::to_string(bound) + " m for " + to_string(unit));
  }
  Tensor out = depth;
  for (float& v : out.data()) {
    if (v == 0.0f) continue;
    v = static_cast<float>(std::clamp(static_cast<double>(v) + shift_m, 0.0, max_depth));
  }
  return out;
}

/// Probability of each transform firing.
struct AugmentPolicy {
  double vflip = 0.5;
  double mirror = 0.5;
  double crop = 0.5;
  double channel_swap = 0.5;
  double c_shift = 0.5;
  double d_shift = 0.5;
  double crop_min = 0.75;
  double crop_max = 1.0;
  bool shifting = true;  // false: default policy only

  static AugmentPolicy none() { return {0, 0, 0, 0, 0, 0, 0.75, 1.0, true}; }
  static AugmentPolicy always() { return {1, 1, 1, 1, 1, 1, 0.75, 1.0, true}; }
};

/// Concrete draws for one sample.
struct AugmentPlan {
  bool vflip = false;
  bool mirror = false;
  bool crop = false;
  std::size_t crop_top = 0;
  std::size_t crop_left = 0;
  std::size_t crop_h = 0;
  std::size_t crop_w = 0;
  bool channel_swap = false;
  std::array<std::size_t, 3> permutation{0, 1, 2};
  bool c_shift = false;
  double beta = 1.0;
  double gamma = 1.0;
  std::array<double, 3> eta{1.0, 1.0, 1.0};
  bool d_shift = false;
  double shift_m = 0.0;
};

namespace detail {
enum AugmentStream : std::uint64_t { kVflip, kMirror, kCrop, kSwap, kCShift, kDShift };
}

/// Draws every transform from its own stream derived from seed, in a fixed order.
inline AugmentPlan draw_plan(std::uint64_t seed, std::size_t height, std::size_t width,
                             SceneUnit unit, const AugmentPolicy& policy = {}) {
  AugmentPlan p;
  auto stream = [&](detail::AugmentStream s) { return Rng(Rng::derive(seed, s)); };
  {
    Rng r = stream(detail::kVflip);
    p.vflip = r.bernoulli(policy.vflip);
  }
  {
    Rng r = stream(detail::kMirror);
    p.mirror = r.bernoulli(policy.mirror);
  }
  {
    Rng r = stream(detail::kCrop);
    p.crop = r.bernoulli(policy.crop);
    const double s = r.uniform(policy.crop_min, policy.crop_max);
    p.crop_h = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(s * static_cast<double>(height))), 1, height);
    p.crop_w = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(s * static_cast<double>(width))), 1, width);
    p.crop_top = r.below(height - p.crop_h + 1);
    p.crop_left = r.below(width - p.crop_w + 1);
  }
  {
    Rng r = stream(detail::kSwap);
    p.channel_swap = r.bernoulli(policy.channel_swap);
    static constexpr std::array<std::array<std::size_t, 3>, 5> kPerms{
        {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    const auto pick = kPerms[r.below(kPerms.size())];
    if (p.channel_swap) p.permutation = pick;
  }
  if (policy.shifting) {
    {
      Rng r = stream(detail::kCShift);
      p.c_shift = r.bernoulli(policy.c_shift);
      p.beta = r.uniform(kShiftFactorMin, kShiftFactorMax);
      p.gamma = r.uniform(kShiftFactorMin, kShiftFactorMax);
      for (double& e : p.eta) e = r.uniform(kShiftFactorMin, kShiftFactorMax);
      if (!p.c_shift) {
        p.beta = p.gamma = 1.0;
        p.eta = {1.0, 1.0, 1.0};
      }
    }
    {
      Rng r = stream(detail::kDShift);
      p.d_shift = r.bernoulli(policy.d_shift);
      const double bound = max_depth_shift(unit);
      p.shift_m = p.d_shift ? r.uniform(-bound, bound) : 0.0;
    }
  }
  return p;
}

inline Tensor flip_rows(const Tensor& t) {
  Tensor out(t.shape());
  const Shape& s = t.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, s.h - 1 - y, x);
  return out;
}

inline Tensor flip_cols(const Tensor& t) {
  Tensor out(t.shape());
  const Shape& s = t.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, y, s.w - 1 - x);
  return out;
}

inline Tensor permute_channels(const Tensor& t, std::array<std::size_t, 3> perm) {
  Tensor out(t.shape());
  for (std::size_t n = 0; n < t.shape().n; ++n)
    for (std::size_t c = 0; c < 3; ++c) std::ranges::copy(t.channel(n, perm[c]), out.channel(n, c).begin());
  return out;
}

/// Applies a drawn plan. Geometric steps act on rgb and depth alike; photometric steps
/// touch rgb only and the depth shift touches depth only.
inline DepthSample apply_plan(const DepthSample& in, const AugmentPlan& p) {
  DepthSample s = in;
  const std::size_t H = s.rgb.shape().h;
  const std::size_t W = s.rgb.shape().w;
  if (s.depth.shape().h != H || s.depth.shape().w != W) {
    throw DimensionError("augment: rgb " + s.rgb.shape().str() + " and depth " +
                         s.depth.shape().str() + " differ in extent");
  }
  if (p.vflip) {
    s.rgb = flip_rows(s.rgb);
    s.depth = flip_rows(s.depth);
  }
  if (p.mirror) {
    s.rgb = flip_cols(s.rgb);
    s.depth = flip_cols(s.depth);
  }
  if (p.crop) {
    s.rgb = resize_bilinear(crop(s.rgb, p.crop_top, p.crop_left, p.crop_h, p.crop_w), H, W);
    s.depth = resize_nearest(crop(s.depth, p.crop_top, p.crop_left, p.crop_h, p.crop_w), H, W);
  }
  if (p.channel_swap) s.rgb = permute_channels(s.rgb, p.permutation);
  if (p.c_shift) s.rgb = c_shift(s.rgb, p.beta, p.gamma, p.eta);
  if (p.d_shift) s.depth = d_shift(s.depth, p.shift_m, s.max_depth, s.unit);
  return s;
}

/// Vertical flip, mirroring, random crop and channel swap, each with its own coin.
inline DepthSample default_policy(const DepthSample& s, std::uint64_t seed,
                                  AugmentPolicy policy = {}) {
  policy.shifting = false;
  return apply_plan(s, draw_plan(seed, s.rgb.shape().h, s.rgb.shape().w, s.unit, policy));
}

/// Default policy followed by the C and D shifts, each with its own coin.
inline DepthSample shifting_policy(const DepthSample& s, std::uint64_t seed,
                                   AugmentPolicy policy = {}) {
  policy.shifting = true;
  return apply_plan(s, draw_plan(seed, s.rgb.shape().h, s.rgb.shape().w, s.unit, policy));
}

}  // namespace meter
