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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meter/kernels.hpp"
#include "meter/loss.hpp"
#include "meter/sample.hpp"
#include "meter/tensor.hpp"

namespace meter {

using Mask = std::vector<std::uint8_t>;

inline constexpr double kDeltaThreshold = 1.25;

namespace detail {

inline void check_metric_args(std::span<const double> y, std::span<const double> yhat,
                              std::span<const std::uint8_t> mask, const char* op) {
  if (y.size() != yhat.size() || (!mask.empty() && mask.size() != y.size())) {
    throw DimensionError(std::string(op) + ": inputs differ in length");
  }
}

template <typename Fn>
std::size_t for_masked(std::span<const double> y, std::span<const std::uint8_t> mask, Fn&& fn) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    fn(i);
    ++n;
  }
  return n;
}

}  // namespace detail

/// Root-mean-square error over the masked pixels. An empty mask selects every pixel.
inline double rmse(std::span<const double> y, std::span<const double> yhat,
                   std::span<const std::uint8_t> mask = {}) {
  detail::check_metric_args(y, yhat, mask, "rmse");
  double sum = 0.0;
  const std::size_t n = detail::for_masked(y, mask, [&](std::size_t i) {
    const double e = y[i] - yhat[i];
    sum += e * e;
  });
  if (n == 0) throw ValidationError("rmse: no pixels selected");
  return std::sqrt(sum / static_cast<double>(n));
}

/// Mean absolute relative error |y - y_hat| / y over the masked pixels.
inline double rel(std::span<const double> y, std::span<const double> yhat,
                  std::span<const std::uint8_t> mask = {}) {
  detail::check_metric_args(y, yhat, mask, "rel");
  double sum = 0.0;
  const std::size_t n = detail::for_masked(y, mask, [&](std::size_t i) {
    if (!(y[i] > 0.0)) throw ValidationError("rel: non-positive ground truth inside the mask");
    sum += std::abs(y[i] - yhat[i]) / y[i];
  });
  if (n == 0) throw ValidationError("rel: no pixels selected");
  return sum / static_cast<double>(n);
}

/// Fraction of masked pixels with max(y / y_hat, y_hat / y) strictly below thr.
inline double delta1(std::span<const double> y, std::span<const double> yhat,
                     std::span<const std::uint8_t> mask = {}, double thr = kDeltaThreshold) {
  detail::check_metric_args(y, yhat, mask, "delta1");
  std::size_t hits = 0;
  const std::size_t n = detail::for_masked(y, mask, [&](std::size_t i) {
    if (!(y[i] > 0.0) || !(yhat[i] > 0.0)) {
      throw ValidationError("delta1: non-positive depth inside the mask");
    }
    if (std::max(y[i] / yhat[i], yhat[i] / y[i]) < thr) ++hits;
  });
  if (n == 0) throw ValidationError("delta1: no pixels selected");
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Evaluation window as fractions of the map extent, e.g. {0.40810811, 0.99189189,
/// 0.03594771, 0.96405229} for the usual outdoor LiDAR crop.
struct CropRect {
  double top = 0.0;
  double bottom = 1.0;
  double left = 0.0;
  double right = 1.0;

  void validate() const {
    if (!(0.0 <= top && top < bottom && bottom <= 1.0 && 0.0 <= left && left < right && right <= 1.0)) {
      throw ValidationError("crop rectangle must satisfy 0 <= top < bottom <= 1 and 0 <= left < right <= 1");
    }
  }
};

struct ImageMetrics {
  double rmse_m = 0.0;
  double rel = 0.0;
  double delta1 = 0.0;
  std::size_t pixels = 0;
};

struct MetricsReport {
  double rmse_m = 0.0;
  double rel = 0.0;
  double delta1 = 0.0;
  std::size_t pixels_evaluated = 0;
  std::size_t images_evaluated = 0;
  std::optional<CropRect> crop;
  std::vector<ImageMetrics> per_image;
  std::vector<std::string> warnings;
};

/// Mask of valid (> 0) ground-truth pixels inside the optional crop.
inline Mask valid_mask(const Grid& y, const std::optional<CropRect>& crop) {
  Mask m(y.size(), 0);
  std::size_t r0 = 0, r1 = y.h, c0 = 0, c1 = y.w;
  if (crop) {
    crop->validate();
    r0 = static_cast<std::size_t>(std::floor(crop->top * static_cast<double>(y.h)));
    r1 = static_cast<std::size_t>(std::ceil(crop->bottom * static_cast<double>(y.h)));
    c0 = static_cast<std::size_t>(std::floor(crop->left * static_cast<double>(y.w)));
    c1 = static_cast<std::size_t>(std::ceil(crop->right * static_cast<double>(y.w)));
  }
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) m[r * y.w + c] = y(r, c) > 0.0 ? 1 : 0;
  return m;
}

/// Metrics of one prediction. Ground truth is brought to the prediction's resolution
/// by nearest-neighbour sampling; returns nullopt if no pixel is valid.
inline std::optional<ImageMetrics> evaluate_image(const Tensor& depth_gt, const Tensor& prediction,
                                                  const std::optional<CropRect>& crop) {
  const Shape& ps = prediction.shape();
  const Tensor gt = depth_gt.shape().h == ps.h && depth_gt.shape().w == ps.w
                        ? depth_gt
                        : resize_nearest(depth_gt, ps.h, ps.w);
  const Grid y = to_grid(gt);
  const Grid p = to_grid(prediction);
  const Mask mask = valid_mask(y, crop);
  ImageMetrics m;
  for (std::uint8_t v : mask) m.pixels += v;
  if (m.pixels == 0) return std::nullopt;
  m.rmse_m = rmse(y.v, p.v, mask);
  m.rel = rel(y.v, p.v, mask);
  m.delta1 = delta1(y.v, p.v, mask);
  return m;
}

using SampleLoader = std::function<DepthSample(std::size_t)>;
/// Maps a (1, 3, H, W) image to a (1, 1, h, w) metric depth map.
using Predictor = std::function<Tensor(const DepthSample&)>;

/// Per-image metrics averaged over the dataset in order. Samples that fail to load or
/// have no valid pixel are recorded as warnings and skipped.
inline MetricsReport evaluate_dataset(std::size_t count, const SampleLoader& load,
                                      const Predictor& predict,
                                      const std::optional<CropRect>& crop = std::nullopt) {
  if (count == 0) throw ValidationError("evaluate_dataset: empty dataset");
  if (crop) crop->validate();
  MetricsReport r;
  r.crop = crop;
  for (std::size_t i = 0; i < count; ++i) {
    std::optional<ImageMetrics> m;
    try {
      const DepthSample s = load(i);
      m = evaluate_image(s.depth, predict(s), crop);
    } catch (const std::exception& e) {
      r.warnings.push_back("sample " + std::to_string(i) + ": " + e.what());
      continue;
    }
    if (!m) {
      r.warnings.push_back("sample " + std::to_string(i) + ": no valid depth pixels, skipped");
      continue;
    }
    r.per_image.push_back(*m);
  }
  if (r.per_image.empty()) {
    throw Error("evaluate_dataset: no sample could be evaluated (" + std::to_string(r.warnings.size()) +
                " failures)");
  }
  for (const ImageMetrics& m : r.per_image) {
    r.rmse_m += m.rmse_m;
    r.rel += m.rel;
    r.delta1 += m.delta1;
    r.pixels_evaluated += m.pixels;
  }
  const auto n = static_cast<double>(r.per_image.size());
  r.rmse_m /= n;
  r.rel /= n;
  r.delta1 /= n;
  r.images_evaluated = r.per_image.size();
  return r;
}

}  // namespace meter
