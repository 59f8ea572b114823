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


#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "meter/augment.hpp"
#include "meter/check/selfcheck.hpp"
#include "meter/io.hpp"
#include "meter/metrics.hpp"
#include "meter/model.hpp"
#include "meter/parallel.hpp"
#include "meter/profile.hpp"

namespace {

using namespace meter;
using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr std::uint64_t kDefaultSeed = 42;

/// Bad flag values detected after parsing; reported like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  bool verbose = false;
  std::string json_out;
};

/// Ordered key/value report printed as "key: value" lines and optionally saved as JSON.
class Report {
 public:
  template <typename T>
  void set(const std::string& key, T&& value) {
    doc_[key] = std::forward<T>(value);
  }
  void attach(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void emit(const Globals& g) const {
    for (const auto& [key, value] : doc_.items()) {
      std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
    if (!g.json_out.empty()) {
      Json all = doc_;
      for (const auto& [key, value] : extra_.items()) all[key] = value;
      std::ofstream out(g.json_out);
      if (!out) throw IoError("cannot write " + g.json_out);
      out << all.dump(2) << "\n";
    }
  }

 private:
  Json doc_ = Json::object();
  Json extra_ = Json::object();
};

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

Variant variant_arg(const std::string& s) {
  const auto v = parse_variant(s);
  if (!v) throw UsageError("unknown variant '" + s + "' (expected s, xs or xxs)");
  return *v;
}

InputSize size_arg(const std::string& s) {
  const auto size = parse_input_size(s);
  if (!size) throw UsageError("--input-size: expected WxH, got '" + s + "'");
  try {
    validate_input_size(*size);
  } catch (const Error& e) {
    throw UsageError(std::string("--input-size: ") + e.what());
  }
  return *size;
}

template <typename F>
auto usage_on_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

/// Loads an archive (variant taken from its header unless forced) or builds a seeded model.
MeterModel obtain_model(const std::string& weights, const std::string& variant, InputSize size,
                        const Globals& g, Report& report) {
  if (weights.empty()) {
    ModelConfig cfg = ModelConfig::preset(variant_arg(variant.empty() ? "s" : variant));
    cfg.input_size = size;
    report.set("weights", "random seed " + std::to_string(g.seed));
    return build(cfg, g.seed);
  }
  const ArchiveHeader header = read_archive_header(weights);
  ModelConfig cfg = ModelConfig::preset(variant.empty() ? header.variant : variant_arg(variant));
  cfg.activation = header.activation;
  cfg.input_size = size;
  report.set("weights", weights);
  return load_weights(weights, cfg);
}

Json metrics_json(const MetricsReport& m) {
  Json per = Json::array();
  for (const ImageMetrics& im : m.per_image) {
    per.push_back({{"rmse_m", im.rmse_m}, {"rel", im.rel}, {"delta1", im.delta1}, {"pixels", im.pixels}});
  }
  return per;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::string variant = "s";
  std::string input_size = "256x192";
  bool totals_only = false;
};

int run_profile(const ProfileArgs& a, const Globals& g) {
  const InputSize size = size_arg(a.input_size);
  const ProfileReport r = profile_config(ModelConfig::preset(variant_arg(a.variant)), size);
  if (!a.totals_only) {
    const std::string table = format_table(r, true);
    std::cout << table.substr(0, table.find("\n\n") + 2);
  }
  Report out;
  out.set("variant", r.variant);
  out.set("input", r.input.str());
  out.set("params", r.params_total);
  out.set("params_m", fixed(r.params_total / 1e6, 3));
  out.set("macs", r.macs_total);
  out.set("macs_g", fixed(r.macs_total / 1e9, 3));
  out.set("weight_bytes", r.weight_bytes);
  out.set("activation_bytes", r.activation_bytes);
  out.set("layers", r.per_layer.size());
  out.attach("per_layer", to_json(r)["per_layer"]);
  out.emit(g);
  return kExitOk;
}

struct InferArgs {
  std::string weights;
  std::string variant;
  std::string image;
  std::string out;
  std::string raw_out;
  std::string colormap = "plasma_reversed";
  std::string input_size = "256x192";
};

int run_infer(const InferArgs& a, const Globals& g) {
  const InputSize size = size_arg(a.input_size);
  const Colormap cmap = usage_on_error([&] { return parse_colormap(a.colormap); });
  Report out;
  const MeterModel model = obtain_model(a.weights, a.variant, size, g, out);
  Tensor rgb = read_rgb(a.image);
  if (rgb.shape().h != size.height || rgb.shape().w != size.width) rgb = resize_bilinear(rgb, size.height, size.width);
  const Tensor depth = model.forward(rgb);
  const DepthRange range = model.config().depth_range;
  write_png(a.out, render_depth(depth, range.min_m, range.max_m, cmap));
  if (!a.raw_out.empty()) write_depth(a.raw_out, depth, DepthEncoding::RawFloat32Meters);
  const auto values = depth.data();
  double lo = values[0], hi = values[0], sum = 0.0;
  for (float v : values) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
    sum += v;
  }
  out.set("variant", to_string(model.config().variant));
  out.set("input", size.str());
  out.set("output", std::to_string(depth.shape().w) + "x" + std::to_string(depth.shape().h));
  out.set("finite", depth.all_finite());
  out.set("depth_min_m", fixed(lo));
  out.set("depth_max_m", fixed(hi));
  out.set("depth_mean_m", fixed(sum / static_cast<double>(values.size())));
  out.set("image_out", a.out);
  if (!a.raw_out.empty()) out.set("raw_out", a.raw_out);
  out.emit(g);
  return kExitOk;
}

struct EvalArgs {
  std::string weights;
  std::string variant;
  std::string dataset;
  std::string crop;
  std::string predictor = "model";
  std::string input_size = "256x192";
};

CropRect crop_arg(const std::string& s) {
  CropRect c;
  char sep1 = 0, sep2 = 0, sep3 = 0;
  std::istringstream in(s);
  in >> c.top >> sep1 >> c.bottom >> sep2 >> c.left >> sep3 >> c.right;
  if (!in || sep1 != ',' || sep2 != ',' || sep3 != ',') {
    throw UsageError("--crop expects top,bottom,left,right as fractions, got '" + s + "'");
  }
  usage_on_error([&] { c.validate(); return 0; });
  return c;
}

int run_eval(const EvalArgs& a, const Globals& g) {
  const InputSize size = size_arg(a.input_size);
  std::optional<CropRect> crop;
  if (!a.crop.empty()) crop = crop_arg(a.crop);
  std::optional<double> constant;
  if (a.predictor.rfind("constant=", 0) == 0) {
    try {
      constant = std::stod(a.predictor.substr(9));
    } catch (const std::exception&) {
      throw UsageError("--predictor constant=<metres> needs a number");
    }
  } else if (a.predictor != "model" && a.predictor != "ground-truth") {
    throw UsageError("--predictor must be model, ground-truth or constant=<metres>");
  }
  const DatasetManifest manifest = load_manifest(a.dataset);
  if (manifest.entries.empty()) throw UsageError("dataset " + a.dataset + " lists no entries");
  if (!crop) crop = manifest.eval_crop;

  Report out;
  std::optional<MeterModel> model;
  if (a.predictor == "model") model = obtain_model(a.weights, a.variant, size, g, out);
  else out.set("predictor", a.predictor);
  const Predictor predict = [&](const DepthSample& s) -> Tensor {
    if (model) return model->forward(s.rgb);
    if (constant) {
      Tensor t(s.depth.shape());
      t.fill(static_cast<float>(*constant));
      return t;
    }
    return s.depth;
  };
  const MetricsReport m = evaluate_dataset(
      manifest.entries.size(), [&](std::size_t i) { return load_sample(manifest, i, size); }, predict, crop);
  out.set("images", manifest.entries.size());
  out.set("images_evaluated", m.images_evaluated);
  out.set("pixels_evaluated", m.pixels_evaluated);
  out.set("rmse_m", fixed(m.rmse_m));
  out.set("rel", fixed(m.rel));
  out.set("delta1", fixed(m.delta1));
  out.set("warnings", m.warnings.size());
  if (g.verbose) {
    for (const std::string& w : m.warnings) std::cerr << "warning: " << w << "\n";
  }
  out.attach("per_image", metrics_json(m));
  out.attach("warning_messages", Json(m.warnings));
  out.emit(g);
  return kExitOk;
}

struct BenchArgs {
  std::string weights;
  std::string variant = "s";
  std::string input_size = "256x192";
  std::size_t iters = 10;
  std::size_t warmup = 1;
};

int run_bench(const BenchArgs& a, const Globals& g) {
  const InputSize size = size_arg(a.input_size);
  if (a.iters == 0) throw UsageError("--iters must be at least 1");
  Report out;
  const MeterModel model = obtain_model(a.weights, a.weights.empty() ? a.variant : "", size, g, out);
  Rng rng(g.seed);
  const Tensor image = random_tensor({1, 3, size.height, size.width}, rng, 0.0, 1.0);
  const Tensor first = model.forward(image);
  const LatencyStats s = bench_latency(model, size, a.iters, a.warmup, g.seed);
  const Tensor last = model.forward(image);
  out.set("variant", to_string(model.config().variant));
  out.set("input", size.str());
  out.set("iterations", s.iterations);
  out.set("warmup", s.warmup);
  out.set("threads", s.threads);
  out.set("latency_ms_mean", fixed(s.mean_ms, 3));
  out.set("latency_ms_std", fixed(s.std_ms, 3));
  out.set("fps", fixed(s.fps, 3));
  out.set("outputs_identical", first == last);
  out.emit(g);
  return first == last ? kExitOk : kExitRuntime;
}

struct SelfcheckArgs {
  double sobel_fault = 0.0;
};

int run_selfcheck(const SelfcheckArgs& a, const Globals& g) {
  set_sobel_fault(a.sobel_fault);
  const auto results = check::run_selfcheck(g.seed);
  set_sobel_fault(0.0);
  std::size_t failed = 0;
  Json list = Json::array();
  for (const check::CheckResult& r : results) {
    std::cout << check::format_check(r) << "\n";
    if (!r.passed) ++failed;
    list.push_back({{"name", r.name}, {"passed", r.passed}, {"measured", r.measured}, {"tolerance", r.tolerance},
                    {"detail", r.detail}});
  }
  Report out;
  out.set("checks", results.size());
  out.set("failed", failed);
  out.set("status", failed == 0 ? "PASS" : "FAIL");
  out.attach("results", list);
  out.emit(g);
  if (failed > 0) {
    for (const check::CheckResult& r : results) {
      if (!r.passed) std::cerr << "failed: " << r.name << "\n";
    }
  }
  return failed == 0 ? kExitOk : kExitRuntime;
}

struct AugmentArgs {
  std::string dataset;
  std::size_t index = 0;
  std::string out_dir = "augment_preview";
  std::string policy = "shifting";
  std::string input_size = "256x192";
  bool force_all = false;
};

int run_augment_preview(const AugmentArgs& a, const Globals& g) {
  const InputSize size = size_arg(a.input_size);
  if (a.policy != "shifting" && a.policy != "default") throw UsageError("--policy must be default or shifting");
  const DatasetManifest manifest = load_manifest(a.dataset);
  if (a.index >= manifest.entries.size()) {
    throw UsageError("--index " + std::to_string(a.index) + " past the " + std::to_string(manifest.entries.size()) +
                     " entries of " + a.dataset);
  }
  const DepthSample before = load_sample(manifest, a.index, size);
  AugmentPolicy policy = a.force_all ? AugmentPolicy::always() : AugmentPolicy{};
  policy.shifting = a.policy == "shifting";
  const AugmentPlan plan = draw_plan(g.seed, size.height, size.width, before.unit, policy);
  const DepthSample after = apply_plan(before, plan);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_rgb(dir / "rgb_before.png", before.rgb);
  write_rgb(dir / "rgb_after.png", after.rgb);
  write_png(dir / "depth_before.png", render_depth(before.depth, 0.0, before.max_depth, Colormap::PlasmaReversed));
  write_png(dir / "depth_after.png", render_depth(after.depth, 0.0, after.max_depth, Colormap::PlasmaReversed));

  Report out;
  out.set("policy", a.policy);
  out.set("seed", g.seed);
  out.set("vflip", plan.vflip);
  out.set("mirror", plan.mirror);
  out.set("crop", plan.crop ? std::to_string(plan.crop_w) + "x" + std::to_string(plan.crop_h) + "+" +
                                  std::to_string(plan.crop_left) + "+" + std::to_string(plan.crop_top)
                            : std::string("false"));
  out.set("channel_swap", plan.channel_swap ? std::to_string(plan.permutation[0]) + std::to_string(plan.permutation[1]) +
                                                  std::to_string(plan.permutation[2])
                                            : std::string("false"));
  out.set("c_shift", plan.c_shift ? "beta=" + fixed(plan.beta, 4) + " gamma=" + fixed(plan.gamma, 4) + " eta=" +
                                        fixed(plan.eta[0], 4) + "," + fixed(plan.eta[1], 4) + "," + fixed(plan.eta[2], 4)
                                  : std::string("false"));
  out.set("d_shift", plan.d_shift ? fixed(plan.shift_m, 4) : std::string("false"));
  out.set("out_dir", dir.string());
  out.emit(g);
  return kExitOk;
}

struct InitArgs {
  std::string variant = "s";
  std::string activation = "relu";
  std::string out;
};

int run_init(const InitArgs& a, const Globals& g) {
  ModelConfig cfg = ModelConfig::preset(variant_arg(a.variant));
  const auto act = parse_activation(a.activation);
  if (!act) throw UsageError("--activation must be relu or silu");
  cfg.activation = *act;
  const MeterModel model = build(cfg, g.seed);
  save_weights(model, a.out);
  Report out;
  out.set("variant", to_string(cfg.variant));
  out.set("activation", to_string(cfg.activation));
  out.set("seed", g.seed);
  out.set("params", model.param_count());
  out.set("tensors", model.weights().size());
  out.set("out", a.out);
  out.emit(g);
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::size_t count = 8;
  std::string size = "256x192";
  std::string encoding = "png16_mm";
  std::string unit = "indoor_cm";
  double max_depth = 10.0;
  std::string scene = "mixed";
  std::optional<double> near_m;
  std::optional<double> far_m;
};

int run_synth(const SynthArgs& a, const Globals& g) {
  SyntheticOptions opt;
  const auto parsed = parse_input_size(a.size);
  if (!parsed || parsed->width == 0 || parsed->height == 0) throw UsageError("--size: expected WxH, got '" + a.size + "'");
  const InputSize size = *parsed;
  opt.width = size.width;
  opt.height = size.height;
  opt.encoding = usage_on_error([&] { return parse_depth_encoding(a.encoding); });
  opt.unit = usage_on_error([&] { return parse_scene_unit(a.unit); });
  if (!(a.max_depth > 0.0)) throw UsageError("--max-depth must be positive");
  opt.max_depth_m = a.max_depth;
  if (a.count == 0) throw UsageError("--count must be at least 1");
  std::vector<SceneSpec> scenes = draw_synthetic_scenes(a.count, g.seed, opt);
  for (SceneSpec& s : scenes) {
    if (a.scene == "plane") s.kind = SceneKind::Plane;
    else if (a.scene == "ramp") s.kind = SceneKind::Ramp;
    else if (a.scene == "box") s.kind = SceneKind::Box;
    else if (a.scene != "mixed") throw UsageError("--scene must be plane, ramp, box or mixed");
    if (a.near_m) s.near_m = *a.near_m;
    if (a.far_m) s.far_m = *a.far_m;
  }
  const DatasetManifest m = write_synthetic_dataset(scenes, a.out_dir, opt);
  Report out;
  out.set("entries", m.entries.size());
  out.set("size", size.str());
  out.set("encoding", to_string(opt.encoding));
  out.set("unit", to_string(opt.unit));
  out.set("manifest", (fs::path(a.out_dir) / "manifest.json").string());
  out.emit(g);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meter: monocular depth runtime and toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "seed for weights, inputs and augmentation draws")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads inside kernels")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "extra diagnostics on stderr");
  app.add_option("--json-out", g.json_out, "also write the report as JSON to this path");

  ProfileArgs profile;
  auto* p = app.add_subcommand("profile", "parameter and MAC counts per layer");
  p->add_option("--variant", profile.variant, "s, xs or xxs")->capture_default_str();
  p->add_option("--input-size", profile.input_size, "WxH")->capture_default_str();
  p->add_flag("--totals-only", profile.totals_only, "skip the per-layer table");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "predict a depth map for one image");
  i->add_option("--weights", infer.weights, "weight archive (omit for a seeded random model)");
  i->add_option("--variant", infer.variant, "expected variant; defaults to the archive's");
  i->add_option("--image", infer.image, "input PNG")->required()->check(CLI::ExistingFile);
  i->add_option("--out", infer.out, "colormapped depth PNG")->required();
  i->add_option("--raw-out", infer.raw_out, "optional raw float32 depth (MDEPTHF1)");
  i->add_option("--colormap", infer.colormap, "plasma_reversed or grayscale")->capture_default_str();
  i->add_option("--input-size", infer.input_size, "WxH")->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "RMSE, REL and delta1 over a dataset manifest");
  e->add_option("--weights", eval.weights, "weight archive (omit for a seeded random model)");
  e->add_option("--variant", eval.variant, "expected variant; defaults to the archive's");
  e->add_option("--dataset", eval.dataset, "manifest.json")->required()->check(CLI::ExistingFile);
  e->add_option("--crop", eval.crop, "top,bottom,left,right fractions");
  e->add_option("--predictor", eval.predictor, "model, ground-truth or constant=<metres>")->capture_default_str();
  e->add_option("--input-size", eval.input_size, "WxH")->capture_default_str();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "single-image latency");
  b->add_option("--weights", bench.weights, "weight archive (omit for a seeded random model)");
  b->add_option("--variant", bench.variant, "s, xs or xxs")->capture_default_str();
  b->add_option("--input-size", bench.input_size, "WxH")->capture_default_str();
  b->add_option("--iters", bench.iters, "timed iterations")->capture_default_str();
  b->add_option("--warmup", bench.warmup, "discarded iterations")->capture_default_str();

  SelfcheckArgs self;
  auto* s = app.add_subcommand("selfcheck", "kernel oracles, loss gradchecks and budget checks");
  s->add_option("--inject-sobel-fault", self.sobel_fault, "test hook: perturb the forward Sobel stencil");

  AugmentArgs aug;
  auto* a = app.add_subcommand("augment-preview", "write a sample before and after augmentation");
  a->add_option("--dataset", aug.dataset, "manifest.json")->required()->check(CLI::ExistingFile);
  a->add_option("--index", aug.index, "entry index")->capture_default_str();
  a->add_option("--out-dir", aug.out_dir, "output directory")->capture_default_str();
  a->add_option("--policy", aug.policy, "default or shifting")->capture_default_str();
  a->add_option("--input-size", aug.input_size, "WxH")->capture_default_str();
  a->add_flag("--all", aug.force_all, "fire every transform");

  InitArgs init;
  auto* n = app.add_subcommand("init", "write a seeded random-weight archive");
  n->add_option("--variant", init.variant, "s, xs or xxs")->capture_default_str();
  n->add_option("--activation", init.activation, "relu or silu")->capture_default_str();
  n->add_option("--out", init.out, "archive path")->required();

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "generate a synthetic dataset with a manifest");
  y->add_option("--out-dir", synth.out_dir, "output directory")->required();
  y->add_option("--count", synth.count, "number of scenes")->capture_default_str();
  y->add_option("--size", synth.size, "WxH")->capture_default_str();
  y->add_option("--encoding", synth.encoding, "png16_mm or raw_f32_m")->capture_default_str();
  y->add_option("--unit", synth.unit, "indoor_cm or outdoor_dm")->capture_default_str();
  y->add_option("--max-depth", synth.max_depth, "metres")->capture_default_str();
  y->add_option("--scene", synth.scene, "plane, ramp, box or mixed")->capture_default_str();
  y->add_option("--near", synth.near_m, "fix the near depth in metres");
  y->add_option("--far", synth.far_m, "fix the far depth in metres");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  set_num_threads(g.threads);
  try {
    if (*p) return run_profile(profile, g);
    if (*i) return run_infer(infer, g);
    if (*e) return run_eval(eval, g);
    if (*b) return run_bench(bench, g);
    if (*s) return run_selfcheck(self, g);
    if (*a) return run_augment_preview(aug, g);
    if (*n) return run_init(init, g);
    if (*y) return run_synth(synth, g);
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
