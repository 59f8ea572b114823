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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "meter/model.hpp"
#include "meter/random.hpp"

namespace meter {

struct LayerProfile {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  Shape out;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double fps = 0.0;
  std::size_t iterations = 0;
  std::size_t warmup = 0;
  int threads = 1;
};

struct ProfileReport {
  std::string variant;
  InputSize input;
  std::uint64_t params_total = 0;
  std::uint64_t macs_total = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t activation_bytes = 0;
  std::vector<LayerProfile> per_layer;
  std::optional<LatencyStats> latency;
};

/// Per-layer parameters and MACs from the layer plan. MACs count multiplications of
/// convolutions and matrix products; activations, normalization and softmax are excluded.
inline ProfileReport profile_config(const ModelConfig& cfg, InputSize size) {
  ProfileReport r;
  r.variant = to_string(cfg.variant);
  r.input = size;
  for (const LayerInfo& l : layer_plan(cfg, size)) {
    r.per_layer.push_back({l.name, l.kind, l.params, l.macs, l.out});
    r.params_total += l.params;
    r.macs_total += l.macs;
    r.activation_bytes += l.out.count() * sizeof(float);
    for (const WeightSpec& s : weight_specs(l)) r.weight_bytes += s.shape.count() * sizeof(float);
  }
  return r;
}

/// Trainable parameters actually held by a model, including biases and batchnorm affine terms.
inline std::uint64_t count_params(const MeterModel& model) { return model.param_count(); }

inline std::uint64_t count_macs(const ModelConfig& cfg, InputSize size) {
  return profile_config(cfg, size).macs_total;
}

inline std::uint64_t count_macs(const MeterModel& model, InputSize size) {
  return count_macs(model.config(), size);
}

/// Profile of a single k x k convolution (padding k/2) over an h x w input.
inline LayerProfile profile_conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                                       std::size_t stride, std::size_t h, std::size_t w,
                                       bool bias, std::size_t groups = 1) {
  const ModelConfig cfg = ModelConfig::preset(Variant::S);
  detail::PlanBuilder b(cfg, h, w);
  b.conv("conv", in_ch, out_ch, kernel, stride, groups, bias, false);
  const LayerInfo l = b.take().front();
  return {l.name, l.kind, l.params, l.macs, l.out};
}

/// Times single-image forward passes. The first `warmup` runs are discarded.
inline LatencyStats bench_latency(const MeterModel& model, InputSize size, std::size_t iterations,
                                  std::size_t warmup = 1, std::uint64_t seed = 0) {
  if (iterations == 0) throw ConfigError("bench_latency: iterations must be at least 1");
  MeterModel m = model;
  m.set_input_size(size);
  Rng rng(seed);
  const Tensor image = random_tensor({1, 3, size.height, size.width}, rng, 0.0, 1.0);
  for (std::size_t i = 0; i < warmup; ++i) (void)m.forward(image);
  std::vector<double> ms;
  ms.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)m.forward(image);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  LatencyStats s;
  s.iterations = iterations;
  s.warmup = warmup;
  s.threads = num_threads();
  for (double v : ms) s.mean_ms += v;
  s.mean_ms /= static_cast<double>(ms.size());
  if (ms.size() > 1) {
    double acc = 0.0;
    for (double v : ms) acc += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = std::sqrt(acc / static_cast<double>(ms.size() - 1));
  }
  s.fps = 1000.0 / s.mean_ms;
  return s;
}

inline std::string format_table(const ProfileReport& r, bool per_layer = true) {
  std::ostringstream os;
  if (per_layer) {
    os << std::left << std::setw(28) << "layer" << std::setw(11) << "kind" << std::right
       << std::setw(12) << "params" << std::setw(16) << "macs" << "  output\n";
    for (const LayerProfile& l : r.per_layer) {
      os << std::left << std::setw(28) << l.name << std::setw(11) << to_string(l.kind) << std::right
         << std::setw(12) << l.params << std::setw(16) << l.macs << "  " << l.out.str() << "\n";
    }
    os << "\n";
  }
  os << std::fixed;
  os << "variant: " << r.variant << "\n";
  os << "input: " << r.input.str() << "\n";
  os << "params: " << r.params_total << " (" << std::setprecision(3) << r.params_total / 1e6 << "M)\n";
  os << "macs: " << r.macs_total << " (" << std::setprecision(3) << r.macs_total / 1e9 << "G)\n";
  os << "weight_bytes: " << r.weight_bytes << "\n";
  os << "activation_bytes: " << r.activation_bytes << "\n";
  if (r.latency) {
    os << std::setprecision(3);
    os << "latency_ms_mean: " << r.latency->mean_ms << "\n";
    os << "latency_ms_std: " << r.latency->std_ms << "\n";
    os << "fps: " << r.latency->fps << "\n";
    os << "threads: " << r.latency->threads << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms}, {"std_ms", s.std_ms},   {"fps", s.fps},
          {"iterations", s.iterations}, {"warmup", s.warmup}, {"threads", s.threads}};
}

inline nlohmann::json to_json(const ProfileReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerProfile& l : r.per_layer) {
    layers.push_back({{"name", l.name},
                      {"kind", to_string(l.kind)},
                      {"params", l.params},
                      {"macs", l.macs},
                      {"output", {l.out.n, l.out.c, l.out.h, l.out.w}}});
  }
  nlohmann::json j = {{"variant", r.variant},
                      {"input", r.input.str()},
                      {"params_total", r.params_total},
                      {"macs_total", r.macs_total},
                      {"weight_bytes", r.weight_bytes},
                      {"activation_bytes", r.activation_bytes},
                      {"per_layer", layers}};
  if (r.latency) j["latency"] = to_json(*r.latency);
  return j;
}

}  // namespace meter
