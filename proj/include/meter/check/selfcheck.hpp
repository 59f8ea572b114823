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

#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "meter/check/gradcheck.hpp"
#include "meter/check/oracles.hpp"
#include "meter/kernels.hpp"
#include "meter/loss.hpp"
#include "meter/model.hpp"
#include "meter/profile.hpp"
#include "meter/random.hpp"

namespace meter::check {

/// One verification: a measured error compared against its tolerance.
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

inline CheckResult bounded(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured, tolerance, measured <= tolerance, std::move(detail)};
}

inline std::string format_check(const CheckResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "measured=%.3g tolerance=%.3g", r.measured, r.tolerance);
  std::string line = r.name + ": " + (r.passed ? "PASS " : "FAIL ") + buf;
  if (!r.detail.empty()) line += " (" + r.detail + ")";
  return line;
}

namespace detail {

inline std::vector<float> random_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline PatchSequence random_sequence(Rng& rng, std::size_t dim) {
  const std::size_t ph = 1 + rng.below(2);
  const std::size_t pw = 1 + rng.below(2);
  return unfold(random_tensor({1 + rng.below(2), dim, ph * (1 + rng.below(3)), pw * (1 + rng.below(3))}, rng), ph, pw);
}

inline std::string instances(std::size_t n) { return std::to_string(n) + " instances"; }

}  // namespace detail

/// Every tensor kernel against its brute-force oracle on `trials` seeded random instances.
inline std::vector<CheckResult> kernel_oracle_suite(std::size_t trials = 50, std::uint64_t seed = 2026,
                                                    double tolerance = 1e-6) {
  using detail::random_values;
  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, std::uint64_t stream, const std::function<double(Rng&)>& trial) {
    Rng rng(Rng::derive(seed, stream));
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) worst = std::max(worst, trial(rng));
    out.push_back(bounded(name, worst, tolerance, detail::instances(trials)));
  };

  run("conv2d_oracle", 1, [](Rng& rng) {
    const std::size_t k = 1 + 2 * rng.below(2);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t pad = rng.below(k / 2 + 1);
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(4), k + rng.below(6), k + rng.below(6)}, rng);
    const Tensor w = random_tensor({1 + rng.below(4), x.shape().c, k, k}, rng);
    const auto b = random_values(w.shape().n, rng);
    return oracle::max_abs_diff(conv2d(x, w, b, stride, pad).data(), oracle::conv2d(x, w, b, stride, pad).data());
  });
  run("depthwise_oracle", 2, [](Rng& rng) {
    const std::size_t c = 1 + rng.below(5);
    const std::size_t stride = 1 + rng.below(2);
    const Tensor x = random_tensor({1 + rng.below(2), c, 3 + rng.below(6), 3 + rng.below(6)}, rng);
    const Tensor w = random_tensor({c, 1, 3, 3}, rng);
    const auto b = random_values(c, rng);
    return oracle::max_abs_diff(depthwise_conv2d(x, w, b, stride, 1).data(),
                                oracle::depthwise_conv2d(x, w, b, stride, 1).data());
  });
  run("pointwise_oracle", 3, [](Rng& rng) {
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6)}, rng);
    const Tensor w = random_tensor({1 + rng.below(6), x.shape().c, 1, 1}, rng);
    const auto b = random_values(w.shape().n, rng);
    return oracle::max_abs_diff(pointwise_conv2d(x, w, b).data(), oracle::conv2d(x, w, b, 1, 0).data());
  });
  run("transposed_conv_oracle", 4, [](Rng& rng) {
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(5)}, rng);
    const Tensor w = random_tensor({x.shape().c, 1 + rng.below(4), 2, 2}, rng);
    const auto b = random_values(w.shape().c, rng);
    return oracle::max_abs_diff(transposed_conv2d(x, w, b).data(), oracle::transposed_conv2d(x, w, b, 2).data());
  });
  run("batchnorm_oracle", 5, [](Rng& rng) {
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(5)}, rng);
    const std::size_t c = x.shape().c;
    const auto mean = random_values(c, rng), var = random_values(c, rng, 0.1, 2.0);
    const auto gamma = random_values(c, rng), beta = random_values(c, rng);
    return oracle::max_abs_diff(batchnorm_inference(x, mean, var, gamma, beta, 1e-5).data(),
                                oracle::batchnorm(x, mean, var, gamma, beta, 1e-5).data());
  });
  run("linear_oracle", 6, [](Rng& rng) {
    const PatchSequence s = detail::random_sequence(rng, 1 + rng.below(6));
    const Tensor w = random_tensor({1 + rng.below(6), s.dim, 1, 1}, rng);
    const auto b = random_values(w.shape().n, rng);
    return oracle::max_abs_diff(linear(s, w, b).data, oracle::linear(s, w, b).data);
  });
  run("layernorm_oracle", 7, [](Rng& rng) {
    const PatchSequence s = detail::random_sequence(rng, 2 + rng.below(6));
    const auto g = random_values(s.dim, rng), b = random_values(s.dim, rng);
    return oracle::max_abs_diff(layernorm(s, g, b, 1e-5).data, oracle::layernorm(s, g, b, 1e-5).data);
  });
  run("attention_oracle", 8, [](Rng& rng) {
    const std::size_t heads = 1 + rng.below(3);
    const std::size_t dim = heads * (1 + rng.below(3));
    const PatchSequence s = detail::random_sequence(rng, dim);
    const Tensor wq = random_tensor({dim, dim, 1, 1}, rng), wk = random_tensor({dim, dim, 1, 1}, rng);
    const Tensor wv = random_tensor({dim, dim, 1, 1}, rng), wo = random_tensor({dim, dim, 1, 1}, rng);
    const auto bo = random_values(dim, rng);
    return oracle::max_abs_diff(multihead_self_attention(s, wq, wk, wv, wo, heads, bo).data,
                                oracle::attention(s, wq, wk, wv, wo, heads, bo).data);
  });

  Rng rng(Rng::derive(seed, 9));
  double unfold_err = 0.0;
  std::size_t fold_mismatch = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t ph = 1 + rng.below(3);
    const std::size_t pw = 1 + rng.below(3);
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(4), ph * (1 + rng.below(3)), pw * (1 + rng.below(3))}, rng);
    const PatchSequence s = unfold(x, ph, pw);
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t p = 0; p < s.area; ++p)
        for (std::size_t k = 0; k < s.tokens; ++k)
          for (std::size_t d = 0; d < s.dim; ++d)
            unfold_err = std::max(unfold_err, static_cast<double>(std::abs(s.at(n, p, k, d) -
                                                                           oracle::unfold_entry(x, ph, pw, n, p, k, d))));
    if (!(fold(s) == x)) ++fold_mismatch;
  }
  out.push_back(bounded("unfold_oracle", unfold_err, 0.0, detail::instances(trials)));
  out.push_back(bounded("fold_unfold_roundtrip", static_cast<double>(fold_mismatch), 0.0,
                        "bit-exact, " + detail::instances(trials)));
  return out;
}

/// Analytic loss gradients against central differences on seeded 8x8 pairs.
inline std::vector<CheckResult> loss_gradcheck_suite(std::size_t pairs = 20, std::uint64_t seed = 7,
                                                     double tolerance = 1e-3) {
  const double range = 9.9;
  const LossWeights w;
  struct Term {
    std::string name;
    std::function<LossTerm(const Grid&, const Grid&)> f;
  };
  const std::vector<Term> terms{
      {"gradcheck_l_depth", [](const Grid& y, const Grid& q) { return l_depth(y, q); }},
      {"gradcheck_l_grad", [](const Grid& y, const Grid& q) { return l_grad(y, q); }},
      {"gradcheck_l_norm", [](const Grid& y, const Grid& q) { return l_norm(y, q); }},
      {"gradcheck_l_ssim", [&](const Grid& y, const Grid& q) { return l_ssim(y, q, range); }},
      {"gradcheck_balanced", [&](const Grid& y, const Grid& q) {
         const LossReport r = balanced_loss(y, q, w, range);
         return LossTerm{r.total, *r.gradient};
       }},
  };
  std::vector<CheckResult> out;
  for (const Term& term : terms) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const auto [y, p] = random_pair(8, 8, Rng::derive(seed, i));
      const GradcheckResult r = gradcheck([&](const Grid& q) { return term.f(y, q); }, y, p);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    CheckResult c = bounded(term.name, worst, tolerance, std::to_string(pairs) + " pairs, " +
                                                             std::to_string(checked) + " points");
    if (checked == 0) c.passed = false;
    out.push_back(std::move(c));
  }
  return out;
}

/// Published parameter and MAC budgets, as relative deviations.
inline std::vector<CheckResult> profile_table_suite() {
  struct Row {
    Variant v;
    double params, macs_indoor, macs_outdoor;
  };
  const Row rows[] = {{Variant::S, 3.29e6, 0.975e9, 2.432e9},
                      {Variant::XS, 1.45e6, 0.579e9, 1.444e9},
                      {Variant::XXS, 0.71e6, 0.186e9, 0.464e9}};
  std::vector<CheckResult> out;
  for (const Row& r : rows) {
    const ModelConfig cfg = ModelConfig::preset(r.v);
    const ProfileReport indoor = profile_config(cfg, {256, 192});
    const ProfileReport outdoor = profile_config(cfg, {636, 192});
    const std::string v = to_string(r.v);
    const auto dev = [](double got, double want) { return std::abs(got / want - 1.0); };
    out.push_back(bounded("params_" + v, dev(static_cast<double>(indoor.params_total), r.params), 0.05,
                          std::to_string(indoor.params_total)));
    out.push_back(bounded("macs_" + v + "_256x192", dev(static_cast<double>(indoor.macs_total), r.macs_indoor), 0.10,
                          std::to_string(indoor.macs_total)));
    out.push_back(bounded("macs_" + v + "_636x192", dev(static_cast<double>(outdoor.macs_total), r.macs_outdoor),
                          0.10, std::to_string(outdoor.macs_total)));
    const double ratio = static_cast<double>(outdoor.macs_total) / static_cast<double>(indoor.macs_total);
    out.push_back(bounded("mac_ratio_" + v, dev(ratio, 636.0 / 256.0), 0.05, "ratio " + std::to_string(ratio)));
  }
  return out;
}

inline std::vector<CheckResult> run_selfcheck(std::uint64_t seed = 2026) {
  std::vector<CheckResult> all = kernel_oracle_suite(50, seed);
  for (CheckResult& r : loss_gradcheck_suite(20, seed)) all.push_back(std::move(r));
  for (CheckResult& r : profile_table_suite()) all.push_back(std::move(r));
  return all;
}

}  // namespace meter::check
