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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "meter/tensor.hpp"

namespace meter {

/// Single-channel map in double precision, row-major.
struct Grid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(std::size_t h_, std::size_t w_, double fill = 0.0) : h(h_), w(w_), v(h_ * w_, fill) {}

  [[nodiscard]] std::size_t size() const { return v.size(); }
  double& operator()(std::size_t y, std::size_t x) { return v[y * w + x]; }
  [[nodiscard]] double operator()(std::size_t y, std::size_t x) const { return v[y * w + x]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline Grid to_grid(const Tensor& t, std::size_t n = 0, std::size_t c = 0) {
  Grid g(t.shape().h, t.shape().w);
  auto src = t.channel(n, c);
  for (std::size_t i = 0; i < g.size(); ++i) g.v[i] = src[i];
  return g;
}

inline Tensor to_tensor(const Grid& g) {
  Tensor t(1, 1, g.h, g.w);
  for (std::size_t i = 0; i < g.size(); ++i) t.data()[i] = static_cast<float>(g.v[i]);
  return t;
}

enum class DepthUnit { Meters, Decimeters, Centimeters };

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 1.0;
  double lambda3 = 1.0;

  /// lambda2 and lambda3 follow the unit of the predicted depth: 1, 10 or 100.
  static LossWeights for_unit(DepthUnit u) {
    const double s = u == DepthUnit::Meters ? 1.0 : (u == DepthUnit::Decimeters ? 10.0 : 100.0);
    return {0.5, s, s};
  }
};

/// One loss term; gradient is with respect to the prediction.
struct LossTerm {
  double value = 0.0;
  Grid gradient;
};

struct LossReport {
  double total = 0.0;
  double l_depth = 0.0;
  double l_grad = 0.0;
  double l_norm = 0.0;
  double l_ssim = 0.0;
  std::optional<Grid> gradient;
};

enum class GradMode {
  Literal,   // mean of signed Sobel responses of |y - y_hat|
  Absolute,  // mean of |Sobel responses|
};

namespace detail {

inline void check_pair(const Grid& y, const Grid& yhat, std::size_t min_extent, const char* op) {
  if (y.h != yhat.h || y.w != yhat.w || y.v.size() != yhat.v.size()) {
    throw DimensionError(std::string(op) + ": maps differ in shape (" + std::to_string(y.h) + "x" +
                         std::to_string(y.w) + " vs " + std::to_string(yhat.h) + "x" +
                         std::to_string(yhat.w) + ")");
  }
  if (y.size() == 0) throw ValidationError(std::string(op) + ": empty map");
  if (y.h < min_extent || y.w < min_extent) {
    throw ValidationError(std::string(op) + ": map " + std::to_string(y.h) + "x" +
                          std::to_string(y.w) + " smaller than " + std::to_string(min_extent) +
                          "x" + std::to_string(min_extent));
  }
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Sobel taps, row-major over (dy, dx) in {-1, 0, 1}.
inline constexpr std::array<double, 9> kSobelX{-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<double, 9> kSobelY{-1, -2, -1, 0, 0, 0, 1, 2, 1};

inline std::atomic<double>& sobel_fault() {
  static std::atomic<double> delta{0.0};
  return delta;
}

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

inline Grid stencil(const Grid& z, std::array<double, 9> k) {
  Grid out(z.h, z.w);
  for (std::size_t y = 0; y < z.h; ++y) {
    for (std::size_t x = 0; x < z.w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, z.h);
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, z.w);
          acc += k[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] * z(sy, sx);
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

/// Transpose of stencil(): scatters g back through the replicate-padded taps.
inline Grid stencil_adjoint(const Grid& g, std::array<double, 9> k) {
  Grid out(g.h, g.w);
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t x = 0; x < g.w; ++x) {
      const double gv = g(y, x);
      if (gv == 0.0) continue;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, g.h);
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, g.w);
          out(sy, sx) += k[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] * gv;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Fault-injection hook: adds delta to one tap of the forward horizontal Sobel stencil
/// (the analytic gradients keep the exact stencil). 0 restores normal behaviour.
inline void set_sobel_fault(double delta) { detail::sobel_fault().store(delta); }

struct SobelGradients {
  Grid gx;
  Grid gy;
};

/// 3x3 Sobel cross-correlation with replicate padding.
inline SobelGradients sobel_gradients(const Grid& z) {
  if (z.h < 3 || z.w < 3) {
    throw ValidationError("sobel_gradients: map " + std::to_string(z.h) + "x" +
                          std::to_string(z.w) + " smaller than 3x3");
  }
  auto kx = detail::kSobelX;
  kx[5] += detail::sobel_fault().load();
  return {detail::stencil(z, kx), detail::stencil(z, detail::kSobelY)};
}

inline LossTerm l_depth(const Grid& y, const Grid& yhat) {
  detail::check_pair(y, yhat, 1, "l_depth");
  const double n = static_cast<double>(y.size());
  LossTerm t{0.0, Grid(y.h, y.w)};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.v[i] - yhat.v[i];
    t.value += std::abs(e);
    t.gradient.v[i] = -detail::sign(e) / n;
  }
  t.value /= n;
  return t;
}

inline LossTerm l_grad(const Grid& y, const Grid& yhat, GradMode mode = GradMode::Literal) {
  detail::check_pair(y, yhat, 3, "l_grad");
  const double n = static_cast<double>(y.size());
  Grid e(y.h, y.w);
  for (std::size_t i = 0; i < y.size(); ++i) e.v[i] = std::abs(y.v[i] - yhat.v[i]);
  const SobelGradients g = sobel_gradients(e);
  LossTerm t{0.0, Grid(y.h, y.w)};
  Grid seed_x(y.h, y.w), seed_y(y.h, y.w);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mode == GradMode::Literal) {
      t.value += g.gx.v[i] + g.gy.v[i];
      seed_x.v[i] = 1.0 / n;
      seed_y.v[i] = 1.0 / n;
    } else {
      t.value += std::abs(g.gx.v[i]) + std::abs(g.gy.v[i]);
      seed_x.v[i] = detail::sign(g.gx.v[i]) / n;
      seed_y.v[i] = detail::sign(g.gy.v[i]) / n;
    }
  }
  t.value /= n;
  const Grid de_x = detail::stencil_adjoint(seed_x, detail::kSobelX);
  const Grid de_y = detail::stencil_adjoint(seed_y, detail::kSobelY);
  for (std::size_t i = 0; i < y.size(); ++i) {
    t.gradient.v[i] = (de_x.v[i] + de_y.v[i]) * detail::sign(yhat.v[i] - y.v[i]);
  }
  return t;
}

inline LossTerm l_norm(const Grid& y, const Grid& yhat) {
  detail::check_pair(y, yhat, 3, "l_norm");
  const double n = static_cast<double>(y.size());
  const SobelGradients gy = sobel_gradients(y);
  const SobelGradients gp = sobel_gradients(yhat);
  LossTerm t{0.0, Grid(y.h, y.w)};
  Grid seed_x(y.h, y.w), seed_y(y.h, y.w);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a0 = -gp.gx.v[i], a1 = -gp.gy.v[i];
    const double b0 = -gy.gx.v[i], b1 = -gy.gy.v[i];
    const double aa = a0 * a0 + a1 * a1 + 1.0;
    const double bb = b0 * b0 + b1 * b1 + 1.0;
    const double ab = a0 * b0 + a1 * b1 + 1.0;
    const double na = std::sqrt(aa);
    const double nb = std::sqrt(bb);
    const double cos = ab / (na * nb);
    t.value += 1.0 - cos;
    // d(1 - cos)/da, then a = -sobel(y_hat) flips the sign.
    const double dA0 = -(b0 / (na * nb) - cos * a0 / aa) / n;
    const double dA1 = -(b1 / (na * nb) - cos * a1 / aa) / n;
    seed_x.v[i] = -dA0;
    seed_y.v[i] = -dA1;
  }
  t.value /= n;
  const Grid dx = detail::stencil_adjoint(seed_x, detail::kSobelX);
  const Grid dy = detail::stencil_adjoint(seed_y, detail::kSobelY);
  for (std::size_t i = 0; i < y.size(); ++i) t.gradient.v[i] = dx.v[i] + dy.v[i];
  return t;
}

inline constexpr std::size_t kSsimWindow = 7;

/// 1 - mean SSIM over every fully contained 7x7 window (uniform weights, population
/// moments, c1 = (0.01 R)^2, c2 = (0.03 R)^2).
inline LossTerm l_ssim(const Grid& y, const Grid& yhat, double dynamic_range) {
  if (!(dynamic_range > 0.0)) throw ValidationError("l_ssim: dynamic range must be positive");
  if (y.h < kSsimWindow || y.w < kSsimWindow) {
    throw ValidationError("l_ssim: map " + std::to_string(y.h) + "x" + std::to_string(y.w) +
                          " smaller than the 7x7 window");
  }
  detail::check_pair(y, yhat, kSsimWindow, "l_ssim");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const std::size_t K = kSsimWindow;
  const double N = static_cast<double>(K * K);
  const double windows = static_cast<double>((y.h - K + 1) * (y.w - K + 1));
  LossTerm t{0.0, Grid(y.h, y.w)};
  double total = 0.0;
  for (std::size_t y0 = 0; y0 + K <= y.h; ++y0) {
    for (std::size_t x0 = 0; x0 + K <= y.w; ++x0) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t r = y0; r < y0 + K; ++r)
        for (std::size_t c = x0; c < x0 + K; ++c) {
          ma += y(r, c);
          mb += yhat(r, c);
        }
      ma /= N;
      mb /= N;
      double va = 0.0, vb = 0.0, cab = 0.0;
      for (std::size_t r = y0; r < y0 + K; ++r)
        for (std::size_t c = x0; c < x0 + K; ++c) {
          va += (y(r, c) - ma) * (y(r, c) - ma);
          vb += (yhat(r, c) - mb) * (yhat(r, c) - mb);
          cab += (y(r, c) - ma) * (yhat(r, c) - mb);
        }
      va /= N;
      vb /= N;
      cab /= N;
      const double A1 = 2 * ma * mb + c1;
      const double A2 = 2 * cab + c2;
      const double B1 = ma * ma + mb * mb + c1;
      const double B2 = va + vb + c2;
      const double s = (A1 * A2) / (B1 * B2);
      total += s;
      // dS/db_p = (alpha + beta * (a_p - ma) + gamma * (b_p - mb)) / N
      const double alpha = (2 * ma * A2) / (B1 * B2) - s * (2 * mb) / B1;
      const double beta = (2 * A1) / (B1 * B2);
      const double gamma = -s * 2 / B2;
      for (std::size_t r = y0; r < y0 + K; ++r)
        for (std::size_t c = x0; c < x0 + K; ++c) {
          const double ds = (alpha + beta * (y(r, c) - ma) + gamma * (yhat(r, c) - mb)) / N;
          t.gradient(r, c) -= ds / windows;
        }
    }
  }
  t.value = 1.0 - total / windows;
  return t;
}

/// Weighted combination: l_depth + l1 * l_grad + l2 * l_norm + l3 * l_ssim.
inline LossReport balanced_loss(const Grid& y, const Grid& yhat, const LossWeights& weights,
                                double dynamic_range, bool with_gradient = true,
                                GradMode mode = GradMode::Literal) {
  if (weights.lambda1 < 0 || weights.lambda2 < 0 || weights.lambda3 < 0) {
    throw ValidationError("balanced_loss: scaling factors must be non-negative");
  }
  const LossTerm d = l_depth(y, yhat);
  const LossTerm g = l_grad(y, yhat, mode);
  const LossTerm n = l_norm(y, yhat);
  const LossTerm s = l_ssim(y, yhat, dynamic_range);
  LossReport r;
  r.l_depth = d.value;
  r.l_grad = g.value;
  r.l_norm = n.value;
  r.l_ssim = s.value;
  r.total = d.value + weights.lambda1 * g.value + weights.lambda2 * n.value + weights.lambda3 * s.value;
  if (with_gradient) {
    Grid total(y.h, y.w);
    for (std::size_t i = 0; i < y.size(); ++i) {
      total.v[i] = d.gradient.v[i] + weights.lambda1 * g.gradient.v[i] +
                   weights.lambda2 * n.gradient.v[i] + weights.lambda3 * s.gradient.v[i];
    }
    r.gradient = std::move(total);
  }
  return r;
}

}  // namespace meter
