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

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "meter/colormap_data.hpp"
#include "meter/kernels.hpp"
#include "meter/metrics.hpp"
#include "meter/model.hpp"
#include "meter/random.hpp"
#include "meter/sample.hpp"

namespace meter {

namespace fs = std::filesystem;

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its contents do not follow the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A weight block fails its CRC or lies past the end of the payload.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

class MissingTensorError : public Error {
 public:
  using Error::Error;
};

class UnexpectedTensorError : public Error {
 public:
  using Error::Error;
};

class VariantMismatchError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::uint32_t crc32_bytes(const unsigned char* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string encode_floats_le(std::span<const float> values) {
  std::string out;
  out.reserve(values.size() * 4);
  for (float v : values) put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline void decode_floats_le(const unsigned char* p, std::span<float> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32_le(p + 4 * i));
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weight archive
//
//   METER-WEIGHTS 1
//   variant <s|xs|xxs>
//   activation <relu|silu>
//   tensors <count>
//   tensor <name> <n> <c> <h> <w> <byte offset> <crc32 hex>
//   ...
//   end
//   <payload: little-endian float32 blocks, offsets relative to the payload start>
// ---------------------------------------------------------------------------

inline constexpr std::string_view kArchiveMagic = "METER-WEIGHTS";
inline constexpr int kArchiveVersion = 1;

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint32_t crc = 0;
};

struct ArchiveHeader {
  int version = kArchiveVersion;
  Variant variant = Variant::S;
  Activation activation = Activation::ReLU;
  std::vector<ArchiveEntry> tensors;
};

inline std::string serialize_weights(const MeterModel& model) {
  std::string payload;
  std::ostringstream head;
  head << kArchiveMagic << ' ' << kArchiveVersion << '\n';
  head << "variant " << to_string(model.config().variant) << '\n';
  head << "activation " << to_string(model.config().activation) << '\n';
  head << "tensors " << model.weights().size() << '\n';
  for (const auto& [name, t] : model.weights()) {
    const std::string block = detail::encode_floats_le(t.data());
    const auto crc = detail::crc32_bytes(reinterpret_cast<const unsigned char*>(block.data()), block.size());
    const Shape& s = t.shape();
    head << "tensor " << name << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << ' '
         << payload.size() << ' ' << std::hex << std::setw(8) << std::setfill('0') << crc << std::dec
         << std::setfill(' ') << '\n';
    payload += block;
  }
  head << "end\n";
  return head.str() + payload;
}

inline void save_weights(const MeterModel& model, const fs::path& path) {
  detail::write_file(path, serialize_weights(model));
}

/// Parses the text header; `payload_start` receives the byte index just past "end\n".
inline ArchiveHeader parse_archive_header(std::string_view bytes, std::size_t& payload_start) {
  ArchiveHeader h;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError("weight archive: header ends before 'end'");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  {
    std::istringstream first(next_line());
    std::string magic;
    first >> magic >> h.version;
    if (magic != kArchiveMagic || !first) throw FormatError("weight archive: bad magic line");
    if (h.version != kArchiveVersion) {
      throw FormatError("weight archive: unsupported version " + std::to_string(h.version));
    }
  }
  std::size_t declared = 0;
  bool have_variant = false;
  for (;;) {
    std::istringstream line(next_line());
    std::string key;
    line >> key;
    if (key == "end") break;
    if (key == "variant") {
      std::string v;
      line >> v;
      const auto parsed = parse_variant(v);
      if (!parsed) throw FormatError("weight archive: unknown variant '" + v + "'");
      h.variant = *parsed;
      have_variant = true;
    } else if (key == "activation") {
      std::string a;
      line >> a;
      const auto parsed = parse_activation(a);
      if (!parsed) throw FormatError("weight archive: unknown activation '" + a + "'");
      h.activation = *parsed;
    } else if (key == "tensors") {
      line >> declared;
    } else if (key == "tensor") {
      ArchiveEntry e;
      std::string crc;
      line >> e.name >> e.shape.n >> e.shape.c >> e.shape.h >> e.shape.w >> e.offset >> crc;
      if (!line || crc.size() != 8) throw FormatError("weight archive: malformed tensor line for '" + e.name + "'");
      e.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
      h.tensors.push_back(std::move(e));
    } else {
      throw FormatError("weight archive: unknown header key '" + key + "'");
    }
  }
  if (!have_variant) throw FormatError("weight archive: missing variant line");
  if (declared != h.tensors.size()) {
    throw FormatError("weight archive: header declares " + std::to_string(declared) + " tensors, lists " +
                      std::to_string(h.tensors.size()));
  }
  payload_start = pos;
  return h;
}

inline MeterModel deserialize_weights(std::string_view bytes, ModelConfig config) {
  std::size_t start = 0;
  const ArchiveHeader h = parse_archive_header(bytes, start);
  if (h.variant != config.variant) {
    throw VariantMismatchError("weight archive holds variant " + to_string(h.variant) +
                               " but the configuration asks for " + to_string(config.variant));
  }
  if (h.activation != config.activation) {
    throw VariantMismatchError("weight archive holds activation " + to_string(h.activation) +
                               " but the configuration asks for " + to_string(config.activation));
  }
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + start;
  const std::size_t payload_size = bytes.size() - start;

  std::map<std::string, const ArchiveEntry*> listed;
  for (const ArchiveEntry& e : h.tensors) {
    if (!listed.emplace(e.name, &e).second) throw FormatError("weight archive: tensor '" + e.name + "' listed twice");
  }
  std::set<std::string> expected;
  for (const WeightSpec& s : weight_specs(config)) {
    expected.insert(s.name);
    if (!listed.contains(s.name)) throw MissingTensorError("weight archive: missing tensor '" + s.name + "'");
  }
  for (const auto& [name, e] : listed) {
    if (!expected.contains(name)) throw UnexpectedTensorError("weight archive: unexpected tensor '" + name + "'");
  }

  WeightMap weights;
  for (const ArchiveEntry& e : h.tensors) {
    const std::uint64_t bytes_needed = static_cast<std::uint64_t>(e.shape.count()) * 4;
    if (e.offset > payload_size || bytes_needed > payload_size - e.offset) {
      throw ChecksumError("weight archive: payload truncated inside tensor '" + e.name + "'");
    }
    const auto crc = detail::crc32_bytes(payload + e.offset, bytes_needed);
    if (crc != e.crc) throw ChecksumError("weight archive: checksum mismatch for tensor '" + e.name + "'");
    Tensor t(e.shape);
    detail::decode_floats_le(payload + e.offset, t.data());
    weights.emplace(e.name, std::move(t));
  }
  return MeterModel(std::move(config), std::move(weights));
}

inline MeterModel load_weights(const fs::path& path, ModelConfig config) {
  return deserialize_weights(detail::read_file(path), std::move(config));
}

/// Reads only the header, for tools that need the variant before building a config.
inline ArchiveHeader read_archive_header(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  std::size_t start = 0;
  return parse_archive_header(bytes, start);
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // row-major, interleaved

  [[nodiscard]] double max_value() const { return bit_depth == 16 ? 65535.0 : 255.0; }
};

namespace detail {

struct PngFile {
  FILE* fp = nullptr;
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
};

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

inline void png_warn(png_structp, png_const_charp) {}

}  // namespace detail

inline PngImage read_png(const fs::path& path) {
  detail::PngFile file{std::fopen(path.string().c_str(), "rb")};
  if (!file.fp) throw IoError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + " is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_fail, detail::png_warn);
  if (!png) throw IoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  PngImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("cannot decode " + path.string() + ": " + message);
  }
  png_init_io(png, file.fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * img.height);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (img.width == 0 || img.height == 0) throw FormatError(path.string() + " has a zero dimension");
  const std::size_t count = img.width * img.height * img.channels;
  img.samples.resize(count);
  if (img.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = raw[i];
  }
  return img;
}

/// Writes 8-bit RGB (channels = 3) or 16-bit grayscale (channels = 1, bit_depth = 16) images.
inline void write_png(const fs::path& path, const PngImage& img) {
  if (img.width == 0 || img.height == 0) throw ValidationError("write_png: zero dimension");
  if (img.samples.size() != img.width * img.height * img.channels) {
    throw DimensionError("write_png: sample count does not match " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + "x" + std::to_string(img.channels));
  }
  int color = 0;
  switch (img.channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw ValidationError("write_png: unsupported channel count " + std::to_string(img.channels));
  }
  if (img.bit_depth != 8 && img.bit_depth != 16) throw ValidationError("write_png: bit depth must be 8 or 16");
  const std::size_t bps = img.bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = img.width * img.channels * bps;
  std::vector<unsigned char> raw(rowbytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bps == 2) {
      raw[2 * i] = static_cast<unsigned char>(img.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(img.samples[i] & 0xFF);
    } else {
      raw[i] = static_cast<unsigned char>(std::min<std::uint16_t>(img.samples[i], 255));
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = raw.data() + y * rowbytes;

  detail::PngFile file{std::fopen(path.string().c_str(), "wb")};
  if (!file.fp) throw IoError("cannot write " + path.string());
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_fail, detail::png_warn);
  if (!png) throw IoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode " + path.string() + ": " + message);
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Decodes any PNG to a (1, 3, H, W) tensor in [0, 1]. Gray is replicated, alpha dropped.
inline Tensor read_rgb(const fs::path& path) {
  const PngImage img = read_png(path);
  Tensor t(Shape{1, 3, img.height, img.width});
  const double scale = 1.0 / img.max_value();
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t base = (y * img.width + x) * img.channels;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = img.channels >= 3 ? base + c : base;
        t.at(0, c, y, x) = static_cast<float>(img.samples[src] * scale);
      }
    }
  }
  return t;
}

/// Encodes a (1, 3, H, W) tensor in [0, 1] as 8-bit RGB.
inline void write_rgb(const fs::path& path, const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.n != 1 || s.c != 3) throw DimensionError("write_rgb: expected (1,3,H,W), got " + s.str());
  PngImage img{s.w, s.h, 3, 8, {}};
  img.samples.resize(s.w * s.h * 3);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(rgb.at(0, c, y, x)), 0.0, 1.0);
        img.samples[(y * s.w + x) * 3 + c] = static_cast<std::uint16_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, img);
}

// ---------------------------------------------------------------------------
// Depth maps
// ---------------------------------------------------------------------------

enum class DepthEncoding { Png16Millimeters, RawFloat32Meters };

inline std::string to_string(DepthEncoding e) {
  return e == DepthEncoding::Png16Millimeters ? "png16_mm" : "raw_f32_m";
}

inline DepthEncoding parse_depth_encoding(std::string_view s) {
  if (s == "png16_mm") return DepthEncoding::Png16Millimeters;
  if (s == "raw_f32_m") return DepthEncoding::RawFloat32Meters;
  throw ValidationError("unknown depth encoding '" + std::string(s) + "' (expected png16_mm or raw_f32_m)");
}

inline SceneUnit parse_scene_unit(std::string_view s) {
  if (s == "indoor_cm") return SceneUnit::IndoorCm;
  if (s == "outdoor_dm") return SceneUnit::OutdoorDm;
  throw ValidationError("unknown scene unit '" + std::string(s) + "' (expected indoor_cm or outdoor_dm)");
}

inline constexpr std::string_view kRawDepthMagic = "MDEPTHF1";

/// Largest quantization error of an encoding, in metres.
inline double depth_quantization_step(DepthEncoding e) { return e == DepthEncoding::Png16Millimeters ? 0.0005 : 0.0; }

inline Tensor read_depth(const fs::path& path, DepthEncoding encoding) {
  if (encoding == DepthEncoding::Png16Millimeters) {
    const PngImage img = read_png(path);
    if (img.channels != 1 || img.bit_depth != 16) {
      throw FormatError(path.string() + ": png16_mm depth must be 16-bit single-channel, got " +
                        std::to_string(img.channels) + " channels at " + std::to_string(img.bit_depth) + " bits");
    }
    Tensor t(Shape{1, 1, img.height, img.width});
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
      t.data()[i] = static_cast<float>(static_cast<double>(img.samples[i]) / 1000.0);
    }
    return t;
  }
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 16 || std::string_view(bytes).substr(0, 8) != kRawDepthMagic) {
    throw FormatError(path.string() + " is not a raw_f32_m depth file");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t w = detail::get_u32_le(p + 8);
  const std::size_t h = detail::get_u32_le(p + 12);
  if (w == 0 || h == 0) throw FormatError(path.string() + " has a zero dimension");
  if (bytes.size() != 16 + w * h * 4) {
    throw FormatError(path.string() + ": payload holds " + std::to_string(bytes.size() - 16) +
                      " bytes, expected " + std::to_string(w * h * 4));
  }
  Tensor t(Shape{1, 1, h, w});
  detail::decode_floats_le(p + 16, t.data());
  return t;
}

inline void write_depth(const fs::path& path, const Tensor& depth, DepthEncoding encoding) {
  const Shape& s = depth.shape();
  if (s.n != 1 || s.c != 1) throw DimensionError("write_depth: expected (1,1,H,W), got " + s.str());
  if (encoding == DepthEncoding::Png16Millimeters) {
    PngImage img{s.w, s.h, 1, 16, {}};
    img.samples.reserve(s.count());
    for (float v : depth.data()) {
      const double mm = std::isfinite(v) ? std::clamp(std::round(static_cast<double>(v) * 1000.0), 0.0, 65535.0) : 0.0;
      img.samples.push_back(static_cast<std::uint16_t>(mm));
    }
    write_png(path, img);
    return;
  }
  std::string bytes(kRawDepthMagic);
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(s.w));
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(s.h));
  bytes += detail::encode_floats_le(depth.data());
  detail::write_file(path, bytes);
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string rgb;
  std::string depth;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  DepthEncoding depth_encoding = DepthEncoding::Png16Millimeters;
  double max_depth_m = 10.0;
  SceneUnit unit = SceneUnit::IndoorCm;
  std::optional<CropRect> eval_crop;
  fs::path base_dir;  // entry paths are relative to this directory

  [[nodiscard]] fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  void validate() const {
    if (!(max_depth_m > 0.0)) throw ValidationError("manifest: max_depth_m must be positive");
    if (eval_crop) eval_crop->validate();
  }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries) entries.push_back({{"rgb", e.rgb}, {"depth", e.depth}});
  nlohmann::json j = {{"depth_encoding", to_string(m.depth_encoding)},
                      {"max_depth_m", m.max_depth_m},
                      {"unit", to_string(m.unit)},
                      {"entries", entries}};
  if (m.eval_crop) {
    j["eval_crop"] = {{"top", m.eval_crop->top},
                      {"bottom", m.eval_crop->bottom},
                      {"left", m.eval_crop->left},
                      {"right", m.eval_crop->right}};
  }
  return j;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  detail::write_file(path, to_json(m).dump(2) + "\n");
}

/// Parses a manifest and checks that every listed file exists.
inline DatasetManifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.depth_encoding = parse_depth_encoding(j.at("depth_encoding").get<std::string>());
    m.max_depth_m = j.at("max_depth_m").get<double>();
    m.unit = parse_scene_unit(j.value("unit", std::string("indoor_cm")));
    if (j.contains("eval_crop")) {
      const auto& c = j.at("eval_crop");
      m.eval_crop = CropRect{c.at("top").get<double>(), c.at("bottom").get<double>(), c.at("left").get<double>(),
                             c.at("right").get<double>()};
    }
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("rgb").get<std::string>(), e.at("depth").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  for (const ManifestEntry& e : m.entries) {
    for (const std::string& p : {e.rgb, e.depth}) {
      if (!fs::exists(m.resolve(p))) throw IoError("manifest " + path.string() + ": missing file " + p);
    }
  }
  return m;
}

/// Reads one entry. rgb is resized bilinearly and depth by nearest neighbour to `size`.
inline DepthSample load_sample(const DatasetManifest& m, std::size_t index, InputSize size) {
  if (index >= m.entries.size()) {
    throw ValidationError("load_sample: index " + std::to_string(index) + " past " + std::to_string(m.entries.size()) +
                          " entries");
  }
  const ManifestEntry& e = m.entries[index];
  Tensor rgb = read_rgb(m.resolve(e.rgb));
  Tensor depth = read_depth(m.resolve(e.depth), m.depth_encoding);
  const Shape rs = rgb.shape();
  const Shape ds = depth.shape();
  if (rs.h != ds.h || rs.w != ds.w) {
    const double ra = static_cast<double>(rs.w) / static_cast<double>(rs.h);
    const double da = static_cast<double>(ds.w) / static_cast<double>(ds.h);
    if (std::abs(ra / da - 1.0) > 0.01) {
      throw DimensionError("load_sample: rgb " + std::to_string(rs.w) + "x" + std::to_string(rs.h) + " and depth " +
                           std::to_string(ds.w) + "x" + std::to_string(ds.h) + " differ in aspect ratio");
    }
  }
  DepthSample s;
  s.rgb = (rs.h == size.height && rs.w == size.width) ? std::move(rgb) : resize_bilinear(rgb, size.height, size.width);
  s.depth = (ds.h == size.height && ds.w == size.width) ? std::move(depth)
                                                         : resize_nearest(depth, size.height, size.width);
  s.unit = m.unit;
  s.max_depth = static_cast<float>(m.max_depth_m);
  return s;
}

// ---------------------------------------------------------------------------
// Depth rendering
// ---------------------------------------------------------------------------

enum class Colormap { PlasmaReversed, Grayscale };

inline std::string to_string(Colormap c) { return c == Colormap::PlasmaReversed ? "plasma_reversed" : "grayscale"; }

inline Colormap parse_colormap(std::string_view s) {
  if (s == "plasma_reversed") return Colormap::PlasmaReversed;
  if (s == "grayscale") return Colormap::Grayscale;
  throw ValidationError("unknown colormap '" + std::string(s) + "' (expected plasma_reversed or grayscale)");
}

using ColorTable = std::array<std::array<std::uint8_t, 3>, 256>;

inline constexpr std::array<std::uint8_t, 3> kInvalidDepthColor{255, 255, 0};

/// Parses a 256-line "r g b" table; lines starting with '#' are comments.
inline ColorTable load_color_table(const fs::path& path) {
  std::istringstream in(detail::read_file(path));
  ColorTable table{};
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream row(line);
    int r = -1, g = -1, b = -1;
    row >> r >> g >> b;
    if (!row || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      throw FormatError(path.string() + ": bad colour row '" + line + "'");
    }
    if (n >= table.size()) throw FormatError(path.string() + ": more than 256 rows");
    table[n++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  if (n != table.size()) throw FormatError(path.string() + ": expected 256 rows, found " + std::to_string(n));
  return table;
}

/// Table indexed by normalized depth (0 at min_m).
inline ColorTable color_table(Colormap c) {
  ColorTable t{};
  for (std::size_t i = 0; i < 256; ++i) {
    if (c == Colormap::PlasmaReversed) {
      t[i] = colormap_data::kPlasma[255 - i];
    } else {
      const auto v = static_cast<std::uint8_t>(i);
      t[i] = {v, v, v};
    }
  }
  return t;
}

/// Maps a depth map linearly onto a colour table. Missing pixels (0 or non-finite) are yellow.
inline PngImage render_depth(const Tensor& depth, double min_m, double max_m, Colormap colormap) {
  if (!(max_m > min_m)) throw ValidationError("render_depth: max_m must exceed min_m");
  const Shape& s = depth.shape();
  if (s.n != 1 || s.c != 1) throw DimensionError("render_depth: expected (1,1,H,W), got " + s.str());
  const ColorTable table = color_table(colormap);
  PngImage img{s.w, s.h, 3, 8, {}};
  img.samples.resize(s.plane() * 3);
  for (std::size_t i = 0; i < s.plane(); ++i) {
    const float d = depth.data()[i];
    std::array<std::uint8_t, 3> rgb = kInvalidDepthColor;
    if (d != 0.0f && std::isfinite(d)) {
      const double t = std::clamp((static_cast<double>(d) - min_m) / (max_m - min_m), 0.0, 1.0);
      rgb = table[static_cast<std::size_t>(std::lround(t * 255.0))];
    }
    for (std::size_t c = 0; c < 3; ++c) img.samples[3 * i + c] = rgb[c];
  }
  return img;
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

enum class SceneKind { Plane, Ramp, Box };

inline std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Plane: return "plane";
    case SceneKind::Ramp: return "ramp";
    case SceneKind::Box: return "box";
  }
  return "?";
}

/// Plane: constant `near_m`. Ramp: rows go linearly from `near_m` (top) to `far_m` (bottom).
/// Box: a rectangle at `near_m` over a plane at `far_m`; the rectangle is given in pixels.
struct SceneSpec {
  SceneKind kind = SceneKind::Plane;
  double near_m = 2.0;
  double far_m = 2.0;
  std::size_t box_top = 0;
  std::size_t box_left = 0;
  std::size_t box_h = 0;
  std::size_t box_w = 0;
  std::uint64_t texture_seed = 0;
};

inline DepthSample synthesize_scene(const SceneSpec& scene, std::size_t width, std::size_t height, double max_depth) {
  DepthSample s;
  s.rgb = Tensor(Shape{1, 3, height, width});
  s.depth = Tensor(Shape{1, 1, height, width});
  s.max_depth = static_cast<float>(max_depth);
  Rng rng(scene.texture_seed);
  std::array<double, 3> tint{};
  for (double& t : tint) t = rng.uniform(0.6, 1.0);
  const std::size_t cell = 8;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double d = scene.near_m;
      if (scene.kind == SceneKind::Ramp) {
        const double t = height > 1 ? static_cast<double>(y) / static_cast<double>(height - 1) : 0.0;
        d = scene.near_m + (scene.far_m - scene.near_m) * t;
      } else if (scene.kind == SceneKind::Box) {
        const bool inside = y >= scene.box_top && y < scene.box_top + scene.box_h && x >= scene.box_left &&
                            x < scene.box_left + scene.box_w;
        d = inside ? scene.near_m : scene.far_m;
      }
      s.depth.at(0, 0, y, x) = static_cast<float>(d);
      const double shade = 1.0 - 0.8 * std::clamp(d / max_depth, 0.0, 1.0);
      const double checker = ((x / cell + y / cell) % 2 == 0) ? 1.0 : 0.85;
      for (std::size_t c = 0; c < 3; ++c) {
        s.rgb.at(0, c, y, x) = static_cast<float>(std::clamp(shade * checker * tint[c], 0.0, 1.0));
      }
    }
  }
  return s;
}

struct SyntheticOptions {
  std::size_t width = 256;
  std::size_t height = 192;
  DepthEncoding encoding = DepthEncoding::Png16Millimeters;
  SceneUnit unit = SceneUnit::IndoorCm;
  double max_depth_m = 10.0;
};

/// Writes rgb/NNNN.png, depth/NNNN.{png,bin} and manifest.json under `out_dir`.
inline DatasetManifest write_synthetic_dataset(const std::vector<SceneSpec>& scenes, const fs::path& out_dir,
                                               const SyntheticOptions& opt = {}) {
  if (scenes.empty()) throw ValidationError("synthetic dataset: at least one scene is required");
  std::error_code ec;
  fs::create_directories(out_dir / "rgb", ec);
  if (!ec) fs::create_directories(out_dir / "depth", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  DatasetManifest m;
  m.depth_encoding = opt.encoding;
  m.max_depth_m = opt.max_depth_m;
  m.unit = opt.unit;
  m.base_dir = out_dir;
  const std::string ext = opt.encoding == DepthEncoding::Png16Millimeters ? ".png" : ".bin";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::ostringstream stem;
    stem << std::setw(4) << std::setfill('0') << i;
    const DepthSample s = synthesize_scene(scenes[i], opt.width, opt.height, opt.max_depth_m);
    ManifestEntry e{"rgb/" + stem.str() + ".png", "depth/" + stem.str() + ext};
    write_rgb(out_dir / e.rgb, s.rgb);
    write_depth(out_dir / e.depth, s.depth, opt.encoding);
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

/// Draws n scenes (plane, ramp, box in turn) from `seed` and writes them.
inline std::vector<SceneSpec> draw_synthetic_scenes(std::size_t n, std::uint64_t seed, const SyntheticOptions& opt = {}) {
  std::vector<SceneSpec> scenes;
  const double lo = 0.05 * opt.max_depth_m;
  const double hi = 0.95 * opt.max_depth_m;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, i));
    SceneSpec s;
    s.kind = static_cast<SceneKind>(i % 3);
    const double a = rng.uniform(lo, hi);
    const double b = rng.uniform(lo, hi);
    s.near_m = std::min(a, b);
    s.far_m = std::max(a, b);
    s.box_h = 1 + rng.below(opt.height / 2);
    s.box_w = 1 + rng.below(opt.width / 2);
    s.box_top = rng.below(opt.height - s.box_h + 1);
    s.box_left = rng.below(opt.width - s.box_w + 1);
    s.texture_seed = rng.next();
    scenes.push_back(s);
  }
  return scenes;
}

inline DatasetManifest generate_synthetic_dataset(std::size_t n, std::uint64_t seed, const fs::path& out_dir,
                                                  const SyntheticOptions& opt = {}) {
  if (n == 0) throw ValidationError("synthetic dataset: n must be at least 1");
  return write_synthetic_dataset(draw_synthetic_scenes(n, seed, opt), out_dir, opt);
}

}  // namespace meter
