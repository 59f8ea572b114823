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


// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

#include "meter/augment.hpp"
#include "meter/check/selfcheck.hpp"
#include "meter/io.hpp"
#include "meter/loss.hpp"
#include "meter/metrics.hpp"
#include "meter/model.hpp"
#include "meter/profile.hpp"

namespace {

using namespace meter;

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::array<Variant, 3> kVariants{Variant::S, Variant::XS, Variant::XXS};

Outcome ac1_params() {
  const std::array<double, 3> want{3.29e6, 1.45e6, 0.71e6};
  Outcome o;
  for (std::size_t i = 0; i < 3; ++i) {
    const MeterModel m = build(ModelConfig::preset(kVariants[i]), 1);
    const double got = static_cast<double>(count_params(m));
    const double dev = got / want[i] - 1.0;
    o.note(to_string(kVariants[i]) + "=" + fmt("%.0f", got) + " (" + fmt("%+.2f%%", 100 * dev) + ")");
    o.require(std::abs(dev) <= 0.05, to_string(kVariants[i]) + " outside 5%");
  }
  return o;
}

Outcome ac2_macs() {
  const std::array<double, 3> indoor{0.975e9, 0.579e9, 0.186e9};
  const std::array<double, 3> outdoor{2.432e9, 1.444e9, 0.464e9};
  Outcome o;
  for (std::size_t i = 0; i < 3; ++i) {
    const ModelConfig cfg = ModelConfig::preset(kVariants[i]);
    const double a = static_cast<double>(count_macs(cfg, {256, 192}));
    const double b = static_cast<double>(count_macs(cfg, {636, 192}));
    const double da = a / indoor[i] - 1.0;
    const double db = b / outdoor[i] - 1.0;
    o.note(to_string(kVariants[i]) + "=" + fmt("%.3fG", a / 1e9) + fmt(" (%+.1f%%)", 100 * da) + "/" +
           fmt("%.3fG", b / 1e9) + fmt(" (%+.1f%%)", 100 * db));
    o.require(std::abs(da) <= 0.10 && std::abs(db) <= 0.10, to_string(kVariants[i]) + " outside 10%");
  }
  return o;
}

Outcome ac3_scaling() {
  const double pixel_ratio = 636.0 / 256.0;
  Outcome o;
  for (Variant v : kVariants) {
    const ModelConfig cfg = ModelConfig::preset(v);
    const double r = static_cast<double>(count_macs(cfg, {636, 192})) / static_cast<double>(count_macs(cfg, {256, 192}));
    o.note(to_string(v) + fmt("=%.3f", r));
    o.require(std::abs(r / pixel_ratio - 1.0) <= 0.05, to_string(v) + " ratio outside 5% of 2.484");
  }
  return o;
}

Outcome from_checks(const std::vector<check::CheckResult>& results) {
  Outcome o;
  double worst = 0.0;
  for (const check::CheckResult& r : results) {
    worst = std::max(worst, r.measured);
    o.require(r.passed, check::format_check(r));
  }
  o.note(std::to_string(results.size()) + " checks, worst " + fmt("%.3g", worst));
  return o;
}

Outcome ac4_kernels() { return from_checks(check::kernel_oracle_suite(50, 2026, 1e-6)); }

Outcome ac5_gradcheck() { return from_checks(check::loss_gradcheck_suite(20, 7, 1e-3)); }

Outcome ac6_loss_identities() {
  Outcome o;
  const LossWeights w{0.5, 10.0, 10.0};
  double worst_equal = 0.0, worst_offset = 0.0, worst_linear = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [y, p] = check::random_pair(8, 8, seed);
    const LossReport same = balanced_loss(y, y, w, 9.9);
    for (double v : {same.total, same.l_depth, same.l_grad, same.l_norm, same.l_ssim}) {
      worst_equal = std::max(worst_equal, std::abs(v));
    }
    Grid shifted = y;
    for (double& v : shifted.v) v += 0.37;
    worst_offset = std::max({worst_offset, std::abs(l_grad(y, shifted).value), std::abs(l_norm(y, shifted).value)});

    const LossReport base = balanced_loss(y, p, {0, 0, 0}, 9.9, false);
    for (int term = 0; term < 3; ++term) {
      const double component = term == 0 ? base.l_grad : (term == 1 ? base.l_norm : base.l_ssim);
      for (double lambda : {0.0, 1.0, 2.0}) {
        LossWeights lw{0, 0, 0};
        (term == 0 ? lw.lambda1 : (term == 1 ? lw.lambda2 : lw.lambda3)) = lambda;
        const double total = balanced_loss(y, p, lw, 9.9, false).total;
        worst_linear = std::max(worst_linear, std::abs(total - (base.l_depth + lambda * component)));
      }
    }
  }
  o.note("y=y_hat " + fmt("%.2g", worst_equal) + ", offset " + fmt("%.2g", worst_offset) + ", linearity " +
         fmt("%.2g", worst_linear));
  o.require(worst_equal <= 1e-9, "y=y_hat components not zero");
  o.require(worst_offset <= 1e-9, "offset pair l_grad/l_norm not zero");
  o.require(worst_linear <= 1e-9, "total not linear in lambda");
  return o;
}

Outcome ac7_metrics() {
  Outcome o;
  const std::vector<double> y{1.5, 2.0, 7.25};
  o.require(rmse(y, y) == 0.0 && rel(y, y) == 0.0 && delta1(y, y) == 1.0, "perfect prediction");
  struct Case {
    const char* name;
    double got, want;
  };
  const std::vector<double> a{1, 2}, b{1, 4};
  const std::vector<double> c{1, 2, 4}, d{2, 1, 4};
  const std::vector<double> one{1}, one3{1.3}, two{2}, three{3};
  const std::vector<double> e{1, 1}, f{1.2, 2.0};
  const std::vector<double> g{1, 2, 3}, h{1.5, 2.5, 3.5};
  const Case cases[] = {
      {"rmse (1,2)/(1,4)", rmse(a, b), std::sqrt(2.0)},
      {"rmse offset", rmse(g, h), 0.5},
      {"rel 2/3", rel(two, three), 0.5},
      {"rel (1,2,4)/(2,1,4)", rel(c, d), 0.5},
      {"delta1 1/1.3", delta1(one, one3), 0.0},
      {"delta1 (1,1)/(1.2,2)", delta1(e, f), 0.5},
  };
  double worst = 0.0;
  for (const Case& k : cases) {
    const double err = std::abs(k.got - k.want);
    worst = std::max(worst, err);
    o.require(err <= 1e-12, k.name);
  }
  o.note(std::to_string(std::size(cases)) + " hand cases, worst " + fmt("%.2g", worst));
  return o;
}

DepthSample coordinate_sample(std::size_t h, std::size_t w) {
  DepthSample s;
  s.rgb = Tensor(Shape{1, 3, h, w});
  s.depth = Tensor(Shape{1, 1, h, w});
  s.max_depth = 1e6f;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      s.rgb.at(0, 0, y, x) = static_cast<float>(x) / static_cast<float>(w);
      s.rgb.at(0, 1, y, x) = static_cast<float>(y) / static_cast<float>(h);
      s.rgb.at(0, 2, y, x) = 0.5f;
      s.depth.at(0, 0, y, x) = static_cast<float>(1 + x + w * y);
    }
  }
  return s;
}

Outcome ac8_augment() {
  Outcome o;
  Rng rng(8);
  DepthSample s;
  s.rgb = random_tensor({1, 3, 48, 64}, rng, 0.0, 1.0);
  s.depth = random_tensor({1, 1, 48, 64}, rng, 0.5, 9.5);
  o.require(c_shift(s.rgb, 1, 1, {1, 1, 1}) == s.rgb, "unit c_shift not identity");
  o.require(d_shift(s.depth, 0.0, 10.0) == s.depth, "zero d_shift not identity");
  const auto none = shifting_policy(s, 5, AugmentPolicy::none());
  o.require(none.rgb == s.rgb && none.depth == s.depth, "all-miss policy not identity");

  const double shift = 0.0731;
  const Tensor shifted = d_shift(s.depth, shift, 10.0);
  bool exact = true;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    exact &= shifted.data()[i] == static_cast<float>(static_cast<double>(s.depth.data()[i]) + shift);
  }
  o.require(exact, "d_shift not an exact scalar add");

  const std::size_t H = 48, W = 64;
  const DepthSample coords = coordinate_sample(H, W);
  AugmentPolicy geo = AugmentPolicy::always();
  geo.c_shift = geo.d_shift = 0.0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const AugmentPlan plan = draw_plan(seed, H, W, coords.unit, geo);
    const DepthSample out = apply_plan(coords, plan);
    std::array<std::size_t, 3> where{};
    for (std::size_t c = 0; c < 3; ++c) where[plan.permutation[c]] = c;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double gx = out.rgb.at(0, where[0], y, x) * static_cast<double>(W);
        const double gy = out.rgb.at(0, where[1], y, x) * static_cast<double>(H);
        const auto id = static_cast<std::size_t>(out.depth.at(0, 0, y, x)) - 1;
        worst = std::max({worst, std::abs(gx - static_cast<double>(id % W)), std::abs(gy - static_cast<double>(id / W))});
      }
    }
  }
  o.require(worst <= 0.5 + 1e-3, "rgb/depth correspondence drifted by " + fmt("%.3f", worst) + " px");

  std::array<int, 6> fired{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const AugmentPlan p = draw_plan(static_cast<std::uint64_t>(i), 192, 256, SceneUnit::IndoorCm);
    fired[0] += p.vflip;
    fired[1] += p.mirror;
    fired[2] += p.crop;
    fired[3] += p.channel_swap;
    fired[4] += p.c_shift;
    fired[5] += p.d_shift;
  }
  std::string rates;
  for (int f : fired) {
    const double r = static_cast<double>(f) / draws;
    rates += (rates.empty() ? "" : " ") + fmt("%.3f", r);
    o.require(std::abs(r - 0.5) <= 0.02, "fire rate " + fmt("%.3f", r));
  }
  o.note("correspondence <= " + fmt("%.3f", worst) + " px; rates " + rates);
  return o;
}

Outcome ac9_persistence() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / ("meter_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  Rng rng(9);
  const Tensor image = random_tensor({1, 3, 192, 256}, rng, 0.0, 1.0);
  for (Variant v : kVariants) {
    const MeterModel m = build(ModelConfig::preset(v), 99);
    const auto path = dir / (to_string(v) + ".meter");
    save_weights(m, path);
    const MeterModel back = load_weights(path, ModelConfig::preset(v));
    o.require(m.forward(image) == back.forward(image), to_string(v) + " forward differs after reload");
  }
  std::filesystem::remove_all(dir);
  o.note("s, xs, xxs bit-identical");
  return o;
}

Outcome ac10_shapes() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::array<InputSize, 2> sizes{InputSize{256, 192}, InputSize{636, 192}};
  const std::array<Shape, 2> expect{Shape{1, 1, 96, 128}, Shape{1, 1, 96, 318}};
  std::size_t models = 0, bad_shape = 0, bad_value = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t si = seed % 2;
    ModelConfig cfg = ModelConfig::preset(kVariants[(seed / 2) % 3]);
    cfg.input_size = sizes[si];
    const MeterModel m = build(cfg, 1000 + seed);
    Rng rng(seed);
    const Tensor image = random_tensor({1, 3, sizes[si].height, sizes[si].width}, rng, 0.0, 1.0);
    const Tensor out = m.forward(image);
    ++models;
    if (out.shape() != expect[si]) ++bad_shape;
    for (float v : out.data()) {
      if (!std::isfinite(v) || v < cfg.depth_range.min_m || v > cfg.depth_range.max_m) {
        ++bad_value;
        break;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.note(std::to_string(models) + " models, " + fmt("%.1f s", secs));
  o.require(bad_shape == 0, std::to_string(bad_shape) + " wrong output shapes");
  o.require(bad_value == 0, std::to_string(bad_value) + " models with values outside the depth range");
  o.require(secs < 120.0, "runtime above 2 minutes");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 parameter counts", ac1_params},     {"AC2 MAC counts", ac2_macs},
      {"AC3 MAC scaling", ac3_scaling},         {"AC4 kernel oracles", ac4_kernels},
      {"AC5 loss gradcheck", ac5_gradcheck},    {"AC6 loss identities", ac6_loss_identities},
      {"AC7 metric identities", ac7_metrics},   {"AC8 augmentation identities", ac8_augment},
      {"AC9 persistence round-trip", ac9_persistence}, {"AC10 end-to-end shapes", ac10_shapes},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.passed) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
