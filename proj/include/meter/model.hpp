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

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meter/kernels.hpp"
#include "meter/random.hpp"
#include "meter/tensor.hpp"

namespace meter {

enum class Variant { S, XS, XXS };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::S: return "s";
    case Variant::XS: return "xs";
    case Variant::XXS: return "xxs";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "s") return Variant::S;
  if (lower == "xs") return Variant::XS;
  if (lower == "xxs") return Variant::XXS;
  return std::nullopt;
}

inline std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "silu"; }

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "silu") return Activation::SiLU;
  return std::nullopt;
}

/// Image extent as width x height.
struct InputSize {
  std::size_t width = 256;
  std::size_t height = 192;

  friend constexpr bool operator==(const InputSize&, const InputSize&) = default;
  [[nodiscard]] std::string str() const {
    return std::to_string(width) + "x" + std::to_string(height);
  }
};

/// Parses "WxH"; returns nullopt on malformed text.
inline std::optional<InputSize> parse_input_size(std::string_view s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string_view::npos || x == 0 || x + 1 >= s.size()) return std::nullopt;
  auto number = [](std::string_view t) -> std::optional<std::size_t> {
    if (t.empty() || t.size() > 6) return std::nullopt;
    std::size_t v = 0;
    for (char c : t) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
  };
  auto w = number(s.substr(0, x));
  auto h = number(s.substr(x + 1));
  if (!w || !h) return std::nullopt;
  return InputSize{*w, *h};
}

/// Total downsampling between the input and the deepest feature map, times the patch size.
inline constexpr std::size_t kExtentQuantum = 64;

/// Extent after replicate padding to the next multiple of kExtentQuantum.
inline std::size_t padded_extent(std::size_t e) {
  return (e + kExtentQuantum - 1) / kExtentQuantum * kExtentQuantum;
}

/// An extent is accepted when it is even and needs at most e/8 pixels of padding.
inline bool valid_extent(std::size_t e) {
  return e >= kExtentQuantum && e % 2 == 0 && (padded_extent(e) - e) * 8 <= e;
}

inline void validate_input_size(InputSize s) {
  for (auto [name, e] : {std::pair{"width", s.width}, std::pair{"height", s.height}}) {
    if (!valid_extent(e)) {
      throw ConfigError("input " + std::string(name) + " " + std::to_string(e) +
                        " unsupported: extents must be even, at least " +
                        std::to_string(kExtentQuantum) + ", and within " +
                        "extent/8 pixels of a multiple of " + std::to_string(kExtentQuantum) +
                        " (e.g. 256x192, 636x192)");
    }
  }
}

struct DepthRange {
  float min_m = 0.1f;
  float max_m = 10.0f;
  [[nodiscard]] double span() const { return static_cast<double>(max_m) - min_m; }
};

struct ModelConfig {
  Variant variant = Variant::S;
  std::array<std::size_t, 10> channels{};
  Activation activation = Activation::ReLU;
  std::size_t patch_h = 2;
  std::size_t patch_w = 2;
  std::size_t heads = 4;
  double ffn_mult = 2.0;
  std::size_t mv2_expansion = 4;
  /// Embedding widths of the two transformer layers.
  std::array<std::size_t, 2> transformer_dims{};
  InputSize input_size{};
  DepthRange depth_range{};
  double bn_eps = 1e-5;
  double ln_eps = 1e-5;

  /// Channel Ci, 1-based.
  [[nodiscard]] std::size_t C(std::size_t i) const { return channels.at(i - 1); }
  [[nodiscard]] std::size_t ffn_hidden(std::size_t d) const {
    return static_cast<std::size_t>(ffn_mult * static_cast<double>(d) + 0.5);
  }

  static ModelConfig preset(Variant v) {
    ModelConfig c;
    c.variant = v;
    switch (v) {
      case Variant::S:
        c.channels = {16, 32, 64, 128, 160, 320, 128, 64, 32, 16};
        c.transformer_dims = {384, 208};
        break;
      case Variant::XS:
        c.channels = {16, 32, 48, 80, 96, 192, 128, 64, 32, 16};
        c.transformer_dims = {272, 96};
        break;
      case Variant::XXS:
        c.channels = {16, 16, 24, 64, 80, 160, 64, 32, 16, 8};
        c.transformer_dims = {48, 176};
        break;
    }
    return c;
  }

  void validate() const {
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i] == 0) throw ConfigError("channel C" + std::to_string(i + 1) + " must be positive");
    }
    for (std::size_t d : transformer_dims) {
      if (d == 0 || d % heads != 0) {
        throw ConfigError("transformer width " + std::to_string(d) + " not divisible by " +
                          std::to_string(heads) + " heads");
      }
    }
    if (heads == 0) throw ConfigError("heads must be positive");
    if (patch_h != 2 || patch_w != 2) throw ConfigError("patch must be 2x2");
    if (!(ffn_mult > 0.0)) throw ConfigError("ffn_mult must be positive");
    if (mv2_expansion == 0) throw ConfigError("mv2_expansion must be positive");
    if (!(depth_range.min_m >= 0.0f) || !(depth_range.max_m > depth_range.min_m)) {
      throw ConfigError("depth range must satisfy 0 <= min < max");
    }
    validate_input_size(input_size);
  }
};

// ---------------------------------------------------------------------------
// Layer plan
// ---------------------------------------------------------------------------

enum class LayerKind { Conv, TransposedConv, Attention, FeedForward, Upsample };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::TransposedConv: return "tconv";
    case LayerKind::Attention: return "attention";
    case LayerKind::FeedForward: return "ffn";
    case LayerKind::Upsample: return "upsample";
  }
  return "?";
}

/// One parameterized layer with its output geometry at a given input size.
struct LayerInfo {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t groups = 1;
  bool bias = false;
  bool batchnorm = false;
  std::size_t hidden = 0;  // feed-forward width
  std::size_t tokens_per_sequence = 0;
  std::size_t sequences = 0;
  Shape out;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct WeightSpec {
  std::string name;
  Shape shape;
  enum class Init { FanIn, Zero, One } init = Init::FanIn;
  std::size_t fan_in = 1;
  bool trainable = true;
};

inline std::vector<WeightSpec> weight_specs(const LayerInfo& l) {
  using I = WeightSpec::Init;
  std::vector<WeightSpec> w;
  auto vec = [](std::size_t n) { return Shape{n, 1, 1, 1}; };
  auto norm = [&](const std::string& p, std::size_t n, bool stats) {
    w.push_back({p + ".gamma", vec(n), I::One, 1, true});
    w.push_back({p + ".beta", vec(n), I::Zero, 1, true});
    if (stats) {
      w.push_back({p + ".mean", vec(n), I::Zero, 1, false});
      w.push_back({p + ".var", vec(n), I::One, 1, false});
    }
  };
  switch (l.kind) {
    case LayerKind::Conv: {
      const std::size_t cin = l.in_ch / l.groups;
      w.push_back({l.name + ".weight", {l.out_ch, cin, l.kernel, l.kernel}, I::FanIn,
                   cin * l.kernel * l.kernel, true});
      if (l.bias) w.push_back({l.name + ".bias", vec(l.out_ch), I::Zero, 1, true});
      if (l.batchnorm) norm(l.name + ".bn", l.out_ch, true);
      break;
    }
    case LayerKind::TransposedConv:
      w.push_back({l.name + ".weight", {l.in_ch, l.out_ch, 2, 2}, I::FanIn, l.in_ch, true});
      w.push_back({l.name + ".bias", vec(l.out_ch), I::Zero, 1, true});
      break;
    case LayerKind::Attention: {
      const std::size_t d = l.in_ch;
      norm(l.name + ".ln", d, false);
      for (const char* p : {".q", ".k", ".v"}) {
        w.push_back({l.name + p + ".weight", {d, d, 1, 1}, I::FanIn, d, true});
      }
      w.push_back({l.name + ".o.weight", {d, d, 1, 1}, I::FanIn, d, true});
      w.push_back({l.name + ".o.bias", vec(d), I::Zero, 1, true});
      break;
    }
    case LayerKind::FeedForward: {
      const std::size_t d = l.in_ch;
      norm(l.name + ".ln", d, false);
      w.push_back({l.name + ".fc1.weight", {l.hidden, d, 1, 1}, I::FanIn, d, true});
      w.push_back({l.name + ".fc1.bias", vec(l.hidden), I::Zero, 1, true});
      w.push_back({l.name + ".fc2.weight", {d, l.hidden, 1, 1}, I::FanIn, l.hidden, true});
      w.push_back({l.name + ".fc2.bias", vec(d), I::Zero, 1, true});
      break;
    }
    case LayerKind::Upsample:
      break;
  }
  return w;
}

namespace detail {

class PlanBuilder {
 public:
  PlanBuilder(const ModelConfig& cfg, std::size_t h, std::size_t w) : cfg_(cfg), h_(h), w_(w) {}

  void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
            std::size_t stride, std::size_t groups, bool bias, bool bn) {
    h_ = (h_ + 2 * (k / 2) - k) / stride + 1;
    w_ = (w_ + 2 * (k / 2) - k) / stride + 1;
    LayerInfo l = make(name, LayerKind::Conv, cin, cout);
    l.kernel = k;
    l.stride = stride;
    l.groups = groups;
    l.bias = bias;
    l.batchnorm = bn;
    finish(l, static_cast<std::uint64_t>(h_ * w_) * cout * (cin / groups) * k * k);
  }

  void tconv(const std::string& name, std::size_t cin, std::size_t cout) {
    const std::uint64_t macs = static_cast<std::uint64_t>(h_ * w_) * cin * cout * 4;
    h_ *= 2;
    w_ *= 2;
    LayerInfo l = make(name, LayerKind::TransposedConv, cin, cout);
    l.kernel = 2;
    l.stride = 2;
    l.bias = true;
    finish(l, macs);
  }

  void mv2(const std::string& name, std::size_t cin, std::size_t cout, std::size_t stride) {
    const std::size_t hid = cin * cfg_.mv2_expansion;
    conv(name + ".expand", cin, hid, 1, 1, 1, false, true);
    conv(name + ".dw", hid, hid, 3, stride, hid, false, true);
    conv(name + ".project", hid, cout, 1, 1, 1, false, true);
  }

  void meter_block(const std::string& name, std::size_t c, std::size_t d) {
    conv(name + ".cb1.conv3", c, c, 3, 1, 1, false, true);
    conv(name + ".cb1.pw", c, d, 1, 1, 1, false, true);
    const std::size_t T = h_ * w_;
    const std::size_t area = cfg_.patch_h * cfg_.patch_w;
    const std::size_t N = T / area;
    LayerInfo attn = make(name + ".tr.attn", LayerKind::Attention, d, d);
    attn.tokens_per_sequence = N;
    attn.sequences = area;
    finish(attn, static_cast<std::uint64_t>(T) * 4 * d * d +
                     static_cast<std::uint64_t>(area) * N * N * d * 2);
    LayerInfo ffn = make(name + ".tr.ffn", LayerKind::FeedForward, d, d);
    ffn.hidden = cfg_.ffn_hidden(d);
    finish(ffn, static_cast<std::uint64_t>(T) * 2 * d * ffn.hidden);
    conv(name + ".fuse", c + d, c, 1, 1, 1, false, true);
    conv(name + ".cb2.conv3", c, c, 3, 1, 1, false, true);
    conv(name + ".cb2.pw", c, c, 1, 1, 1, false, true);
  }

  void upsample(const std::string& name, std::size_t c) {
    h_ *= 2;
    w_ *= 2;
    LayerInfo l = make(name, LayerKind::Upsample, c, c);
    finish(l, 0);
  }

  [[nodiscard]] std::size_t h() const { return h_; }
  [[nodiscard]] std::size_t w() const { return w_; }
  std::vector<LayerInfo> take() { return std::move(layers_); }

 private:
  static LayerInfo make(std::string name, LayerKind kind, std::size_t cin, std::size_t cout) {
    LayerInfo l;
    l.name = std::move(name);
    l.kind = kind;
    l.in_ch = cin;
    l.out_ch = cout;
    return l;
  }

  void finish(LayerInfo& l, std::uint64_t macs) {
    l.out = Shape{1, l.out_ch, h_, w_};
    l.macs = macs;
    for (const WeightSpec& s : weight_specs(l)) {
      if (s.trainable) l.params += s.shape.count();
    }
    layers_.push_back(std::move(l));
  }

  const ModelConfig& cfg_;
  std::size_t h_;
  std::size_t w_;
  std::vector<LayerInfo> layers_;
};

}  // namespace detail

/// Every parameterized layer in execution order, evaluated at the padded input size.
inline std::vector<LayerInfo> layer_plan(const ModelConfig& cfg, InputSize size) {
  validate_input_size(size);
  detail::PlanBuilder b(cfg, padded_extent(size.height), padded_extent(size.width));
  b.conv("stem", 3, cfg.C(1), 3, 2, 1, false, true);
  b.mv2("enc.mv2_1", cfg.C(1), cfg.C(2), 1);
  b.mv2("enc.mv2_2", cfg.C(2), cfg.C(3), 2);
  b.mv2("enc.mv2_3", cfg.C(3), cfg.C(3), 1);
  b.mv2("enc.mv2_4", cfg.C(3), cfg.C(3), 1);
  b.mv2("enc.mv2_5", cfg.C(3), cfg.C(4), 2);
  b.mv2("enc.mv2_6", cfg.C(4), cfg.C(4), 2);
  b.meter_block("enc.meter_1", cfg.C(4), cfg.transformer_dims[0]);
  b.mv2("enc.mv2_7", cfg.C(4), cfg.C(5), 2);
  b.meter_block("enc.meter_2", cfg.C(5), cfg.transformer_dims[1]);
  b.conv("enc.out", cfg.C(5), cfg.C(6), 1, 1, 1, false, true);
  b.conv("dec.in", cfg.C(6), cfg.C(7), 1, 1, 1, false, true);
  const std::array<std::size_t, 3> skip_ch{cfg.C(4), cfg.C(4), cfg.C(3)};
  std::size_t prev = cfg.C(7);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "dec.up_" + std::to_string(i + 1);
    const std::size_t cout = cfg.C(8 + i);
    b.tconv(p + ".tconv", prev, cout);
    b.conv(p + ".conv3", cout + skip_ch[i], cout, 3, 1, 1, false, true);
    b.conv(p + ".pw", cout, cout, 1, 1, 1, false, true);
    prev = cout;
  }
  b.conv("head", prev, 1, 3, 1, 1, true, false);
  b.upsample("head.upsample", 1);
  return b.take();
}

inline std::vector<WeightSpec> weight_specs(const ModelConfig& cfg) {
  std::vector<WeightSpec> all;
  for (const LayerInfo& l : layer_plan(cfg, cfg.input_size)) {
    for (WeightSpec& s : weight_specs(l)) all.push_back(std::move(s));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Observations collected during one forward pass.
struct ForwardTrace {
  std::map<std::string, std::size_t> weight_uses;
  std::map<std::string, Shape> outputs;
  std::vector<std::size_t> concat_channels;        // per METER block, before the fuse conv
  std::vector<std::size_t> transformer_layers;     // per METER block
  std::vector<Shape> skips;                        // deepest first
  Shape bottleneck;
};

using WeightMap = std::map<std::string, Tensor>;

/// Runs named blocks of the network against a weight map. Exposed so individual blocks
/// can be exercised in isolation.
struct BlockRunner {
  const WeightMap& weights;
  const ModelConfig& config;
  ForwardTrace* trace = nullptr;

  const Tensor& w(const std::string& name) const {
    auto it = weights.find(name);
    if (it == weights.end()) throw ConfigError("unknown weight " + name);
    if (trace != nullptr) trace->weight_uses[name] += 1;
    return it->second;
  }
  std::span<const float> v(const std::string& name) const { return w(name).data(); }

  void record(const std::string& name, const Tensor& t) const {
    if (trace != nullptr) trace->outputs[name] = t.shape();
  }

  Tensor bn(const std::string& p, const Tensor& x) const {
    return batchnorm_inference(x, v(p + ".bn.mean"), v(p + ".bn.var"), v(p + ".bn.gamma"),
                               v(p + ".bn.beta"), config.bn_eps);
  }

  /// Convolution with batchnorm (or bias for the head) and optional activation.
  Tensor conv(const std::string& p, const Tensor& x, std::size_t stride, std::size_t pad,
              std::size_t groups, bool act) const {
    const Tensor& k = w(p + ".weight");
    Tensor y;
    const bool has_bn = weights.count(p + ".bn.gamma") != 0;
    std::span<const float> bias = has_bn ? std::span<const float>{} : v(p + ".bias");
    if (k.shape().h == 1 && groups == 1) {
      y = pointwise_conv2d(x, k, bias);
    } else if (groups > 1) {
      y = depthwise_conv2d(x, k, bias, stride, pad);
    } else {
      y = conv2d(x, k, bias, stride, pad);
    }
    if (has_bn) y = bn(p, y);
    if (act) activate_inplace(y.data(), config.activation);
    record(p, y);
    return y;
  }

  Tensor tconv(const std::string& p, const Tensor& x) const {
    Tensor y = transposed_conv2d(x, w(p + ".weight"), v(p + ".bias"));
    record(p, y);
    return y;
  }

  Tensor mv2(const std::string& p, const Tensor& x, std::size_t stride) const {
    Tensor h = conv(p + ".expand", x, 1, 0, 1, true);
    h = conv(p + ".dw", h, stride, 1, h.shape().c, true);
    h = conv(p + ".project", h, 1, 0, 1, false);
    if (stride == 1 && h.shape() == x.shape()) add_inplace(h, x);
    return h;
  }

  Tensor meter_block(const std::string& p, const Tensor& x) const {
    const ModelConfig& c = config;
    Tensor t = conv(p + ".cb1.conv3", x, 1, 1, 1, true);
    t = conv(p + ".cb1.pw", t, 1, 0, 1, false);
    PatchSequence seq = unfold(t, c.patch_h, c.patch_w);
    const std::string a = p + ".tr.attn";
    PatchSequence h = layernorm(seq, v(a + ".ln.gamma"), v(a + ".ln.beta"), c.ln_eps);
    h = multihead_self_attention(h, w(a + ".q.weight"), w(a + ".k.weight"), w(a + ".v.weight"),
                                 w(a + ".o.weight"), c.heads, v(a + ".o.bias"));
    add_inplace(seq, h);
    const std::string f = p + ".tr.ffn";
    h = layernorm(seq, v(f + ".ln.gamma"), v(f + ".ln.beta"), c.ln_eps);
    h = linear(h, w(f + ".fc1.weight"), v(f + ".fc1.bias"));
    activate_inplace(h.data, c.activation);
    h = linear(h, w(f + ".fc2.weight"), v(f + ".fc2.bias"));
    add_inplace(seq, h);
    Tensor folded = fold(seq);
    record(a, folded);
    record(f, folded);
    Tensor cat = concat_channels(x, folded);
    if (trace != nullptr) {
      trace->concat_channels.push_back(cat.shape().c);
      trace->transformer_layers.push_back(1);
    }
    Tensor y = conv(p + ".fuse", cat, 1, 0, 1, true);
    y = conv(p + ".cb2.conv3", y, 1, 1, 1, true);
    y = conv(p + ".cb2.pw", y, 1, 0, 1, true);
    return y;
  }
};

class MeterModel {
 public:
  MeterModel() = default;
  MeterModel(ModelConfig config, WeightMap weights) : config_(std::move(config)), weights_(std::move(weights)) {
    config_.validate();
    check_weights();
  }

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const WeightMap& weights() const { return weights_; }

  /// Re-targets the nominal input size; weights are size independent.
  void set_input_size(InputSize size) {
    validate_input_size(size);
    config_.input_size = size;
  }

  [[nodiscard]] std::uint64_t param_count() const {
    std::uint64_t n = 0;
    for (const WeightSpec& s : weight_specs(config_)) {
      if (s.trainable) n += weights_.at(s.name).size();
    }
    return n;
  }

  /// Output extent (height, width) for the configured input size.
  [[nodiscard]] Shape output_shape(std::size_t batch = 1) const {
    return Shape{batch, 1, config_.input_size.height / 2, config_.input_size.width / 2};
  }

  /// Encoder pass. Returns the bottleneck and the skips ordered deepest first.
  struct EncoderOutput {
    Tensor bottleneck;
    std::vector<Tensor> skips;
  };

  [[nodiscard]] EncoderOutput encode(const Tensor& padded, ForwardTrace* trace = nullptr) const {
    BlockRunner ctx{weights_, config_, trace};
    Tensor x = ctx.conv("stem", padded, 2, 1, 1, true);
    x = ctx.mv2("enc.mv2_1", x, 1);
    x = ctx.mv2("enc.mv2_2", x, 2);
    x = ctx.mv2("enc.mv2_3", x, 1);
    x = ctx.mv2("enc.mv2_4", x, 1);
    Tensor s4 = x;
    x = ctx.mv2("enc.mv2_5", x, 2);
    Tensor s8 = x;
    x = ctx.mv2("enc.mv2_6", x, 2);
    x = ctx.meter_block("enc.meter_1", x);
    Tensor s16 = x;
    x = ctx.mv2("enc.mv2_7", x, 2);
    x = ctx.meter_block("enc.meter_2", x);
    x = ctx.conv("enc.out", x, 1, 0, 1, true);
    EncoderOutput out{std::move(x), {std::move(s16), std::move(s8), std::move(s4)}};
    if (trace != nullptr) {
      trace->bottleneck = out.bottleneck.shape();
      trace->skips.clear();
      for (const Tensor& s : out.skips) trace->skips.push_back(s.shape());
    }
    return out;
  }

  /// Decoder pass to the padded half-resolution depth map (unclamped).
  [[nodiscard]] Tensor decode(const EncoderOutput& enc, ForwardTrace* trace = nullptr) const {
    BlockRunner ctx{weights_, config_, trace};
    if (enc.skips.size() != 3) throw DimensionError("decode: expected 3 skip tensors");
    Tensor x = ctx.conv("dec.in", enc.bottleneck, 1, 0, 1, true);
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string p = "dec.up_" + std::to_string(i + 1);
      x = ctx.tconv(p + ".tconv", x);
      const Shape& ss = enc.skips[i].shape();
      if (ss.n != x.shape().n || ss.h != x.shape().h || ss.w != x.shape().w) {
        throw DimensionError("decode: skip " + ss.str() + " does not match upsampled " +
                             x.shape().str());
      }
      x = concat_channels(x, enc.skips[i]);
      x = ctx.conv(p + ".conv3", x, 1, 1, 1, true);
      x = ctx.conv(p + ".pw", x, 1, 0, 1, true);
    }
    x = ctx.conv("head", x, 1, 1, 1, false);
    x = resize_bilinear(x, x.shape().h * 2, x.shape().w * 2);
    ctx.record("head.upsample", x);
    return x;
  }

  /// Full inference: (b, 3, H, W) image in [0, 1] to (b, 1, H/2, W/2) metric depth.
  [[nodiscard]] Tensor forward(const Tensor& image, ForwardTrace* trace = nullptr) const {
    const Shape& s = image.shape();
    if (s.c != 3 || s.n == 0 || s.h != config_.input_size.height ||
        s.w != config_.input_size.width) {
      throw DimensionError("forward: image " + s.str() + " does not match configured input " +
                           config_.input_size.str() + " (expected (b, 3, " +
                           std::to_string(config_.input_size.height) + ", " +
                           std::to_string(config_.input_size.width) + "))");
    }
    const Tensor padded = pad_replicate(image, padded_extent(s.h) - s.h, padded_extent(s.w) - s.w);
    Tensor depth = decode(encode(padded, trace), trace);
    depth = crop(depth, 0, 0, s.h / 2, s.w / 2);
    clamp_inplace(depth, config_.depth_range.min_m, config_.depth_range.max_m);
    return depth;
  }

 private:
  void check_weights() const {
    std::size_t expected = 0;
    for (const WeightSpec& s : weight_specs(config_)) {
      ++expected;
      auto it = weights_.find(s.name);
      if (it == weights_.end()) throw ConfigError("missing weight " + s.name);
      if (it->second.shape() != s.shape) {
        throw DimensionError("weight " + s.name + " has shape " + it->second.shape().str() +
                             ", expected " + s.shape.str());
      }
    }
    if (expected != weights_.size()) {
      throw ConfigError("weight map holds " + std::to_string(weights_.size()) +
                        " tensors, expected " + std::to_string(expected));
    }
  }

  ModelConfig config_;
  WeightMap weights_;
};

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Deterministic random initialization. Each tensor draws from its own stream keyed by
/// its name, so the values of one tensor do not depend on which others exist.
inline MeterModel build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  WeightMap weights;
  for (const WeightSpec& s : weight_specs(config)) {
    Tensor t(s.shape);
    switch (s.init) {
      case WeightSpec::Init::Zero: break;
      case WeightSpec::Init::One: t.fill(1.0f); break;
      case WeightSpec::Init::FanIn: {
        Rng rng(Rng::derive(seed, name_hash(s.name)));
        const double bound = std::sqrt(6.0 / static_cast<double>(s.fan_in));
        for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
        break;
      }
    }
    if (!weights.emplace(s.name, std::move(t)).second) {
      throw ConfigError("duplicate weight name " + s.name);
    }
  }
  return MeterModel(config, std::move(weights));
}

}  // namespace meter
