#pragma once

#include "platonic/networks.hpp"
#include "platonic/volume.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace platonic {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file: " + path);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline void write_f32(std::ostream& os, const float* data, std::size_t n) {
  // files are little-endian; this targets little-endian hosts
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

inline void read_f32(std::istream& is, float* data, std::size_t n, const std::string& path) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4)))
    throw IoError("truncated payload: " + path);
}

}  // namespace detail

// ---- PVOX: voxel grid files ----
// magic "PVOX", u32 version=1, u32 n_c, u32 n_p, then n_c*n_p^3 f32 values
// channel-major z,y,x. Bit-exact round trip.

inline void save_volume(const VoxelGrid<float>& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write("PVOX", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(grid.nc));
  detail::write_u32(os, static_cast<std::uint32_t>(grid.np));
  detail::write_f32(os, grid.data.v.data(), static_cast<std::size_t>(grid.data.size()));
  if (!os) throw IoError("write failed: " + path);
}

inline VoxelGrid<float> load_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PVOX", 4) != 0)
    throw FormatError("bad PVOX magic: " + path);
  if (detail::read_u32(is, path) != 1) throw FormatError("unsupported PVOX version: " + path);
  int nc = static_cast<int>(detail::read_u32(is, path));
  int np = static_cast<int>(detail::read_u32(is, path));
  if (nc < 1 || np < 1 || nc > 16 || np > 4096) throw FormatError("bad PVOX header: " + path);
  VoxelGrid<float> grid(nc, np);
  detail::read_f32(is, grid.data.v.data(), static_cast<std::size_t>(grid.data.size()), path);
  return grid;
}

// ---- PNET: network checkpoints ----
// magic "PNET", u32 version=1, u32 entry count, manifest of
// (u32 name length, name bytes, u32 rank, u32 dims...), then the f32
// payloads in manifest order.

template <class S>
void save_checkpoint(const NetworkParams<S>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write("PNET", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(params.p.size()));
  for (const auto& [name, t] : params.p) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) detail::write_u32(os, static_cast<std::uint32_t>(d));
  }
  for (const auto& [name, t] : params.p) {
    if constexpr (std::is_same_v<S, float>) {
      detail::write_f32(os, t.v.data(), static_cast<std::size_t>(t.size()));
    } else {
      Tensor<float> f = t.template cast<float>();
      detail::write_f32(os, f.v.data(), static_cast<std::size_t>(f.size()));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

template <class S>
NetworkParams<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PNET", 4) != 0)
    throw FormatError("bad PNET magic: " + path);
  if (detail::read_u32(is, path) != 1) throw FormatError("unsupported PNET version: " + path);
  std::uint32_t count = detail::read_u32(is, path);
  std::vector<std::pair<std::string, Shape>> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = detail::read_u32(is, path);
    if (len > 4096) throw FormatError("bad PNET manifest: " + path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("truncated manifest: " + path);
    std::uint32_t rank = detail::read_u32(is, path);
    if (rank > 8) throw FormatError("bad PNET manifest: " + path);
    Shape dims(rank);
    for (auto& d : dims) d = static_cast<int>(detail::read_u32(is, path));
    manifest.emplace_back(std::move(name), std::move(dims));
  }
  NetworkParams<S> params;
  for (auto& [name, dims] : manifest) {
    Tensor<float> t(dims);
    detail::read_f32(is, t.v.data(), static_cast<std::size_t>(t.size()), path);
    params.p.emplace(name, t.template cast<S>());
  }
  return params;
}

// ---- PNG ----

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 gray, 3 RGB, 4 RGBA, 8-bit
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

RawImage png_read(const std::string& path);
void png_write(const RawImage& img, const std::string& path);

// Area-average resample of a channel plane to np x np.
inline std::vector<float> area_resize(const std::vector<float>& src, int w, int h, int np) {
  std::vector<float> dst(static_cast<std::size_t>(np) * np, 0.f);
  const double sx = double(w) / np, sy = double(h) / np;
  for (int oy = 0; oy < np; ++oy)
    for (int ox = 0; ox < np; ++ox) {
      double y0 = oy * sy, y1 = (oy + 1) * sy;
      double x0 = ox * sx, x1 = (ox + 1) * sx;
      double acc = 0;
      for (int iy = static_cast<int>(y0); iy < static_cast<int>(std::ceil(y1)); ++iy) {
        double wy = std::min<double>(y1, iy + 1) - std::max<double>(y0, iy);
        for (int ix = static_cast<int>(x0); ix < static_cast<int>(std::ceil(x1)); ++ix) {
          double wx = std::min<double>(x1, ix + 1) - std::max<double>(x0, ix);
          acc += wy * wx * src[static_cast<std::size_t>(iy) * w + ix];
        }
      }
      dst[static_cast<std::size_t>(oy) * np + ox] = static_cast<float>(acc / (sx * sy));
    }
  return dst;
}

// Loads an 8-bit PNG into an n_p image with `channels` in {1, 3, 4}.
// RGBA sources are composited onto white; with channels = 4 the alpha is
// kept as a mask channel. Values in [0,1], resized by area averaging.
inline Image<float> load_image(const std::string& path, int np, int channels) {
  RawImage raw = png_read(path);
  const int n = raw.width * raw.height;
  std::vector<std::vector<float>> planes;  // composited RGB + alpha
  std::vector<float> r(n), g(n), b(n), a(n, 1.f);
  for (int i = 0; i < n; ++i) {
    float alpha = 1.f;
    float rr, gg, bb;
    if (raw.channels == 1) {
      rr = gg = bb = raw.pixels[i] / 255.f;
    } else {
      const std::uint8_t* px = &raw.pixels[static_cast<std::size_t>(i) * raw.channels];
      rr = px[0] / 255.f;
      gg = px[1] / 255.f;
      bb = px[2] / 255.f;
      if (raw.channels == 4) alpha = px[3] / 255.f;
    }
    // composite onto white
    r[i] = rr * alpha + (1.f - alpha);
    g[i] = gg * alpha + (1.f - alpha);
    b[i] = bb * alpha + (1.f - alpha);
    a[i] = alpha;
  }
  Image<float> out(channels, np);
  auto put = [&](int c, const std::vector<float>& plane) {
    auto resized = area_resize(plane, raw.width, raw.height, np);
    std::copy(resized.begin(), resized.end(), out.data.v.data() + static_cast<std::int64_t>(c) * np * np);
  };
  if (channels == 1) {
    std::vector<float> lum(n);
    for (int i = 0; i < n; ++i) lum[i] = (r[i] + g[i] + b[i]) / 3.f;
    put(0, lum);
  } else {
    put(0, r);
    put(1, g);
    put(2, b);
    if (channels == 4) put(3, a);
  }
  return out;
}

inline void save_image(const Image<float>& img, const std::string& path) {
  RawImage raw;
  raw.width = raw.height = img.np;
  raw.channels = img.nc == 1 ? 1 : (img.nc == 4 ? 4 : 3);
  raw.pixels.resize(static_cast<std::size_t>(img.np) * img.np * raw.channels);
  const int n = img.np * img.np;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < raw.channels; ++c) {
      float v = std::clamp(img.data.v[static_cast<std::int64_t>(c) * n + i], 0.f, 1.f);
      raw.pixels[static_cast<std::size_t>(i) * raw.channels + c] =
          static_cast<std::uint8_t>(std::lround(v * 255.f));
    }
  png_write(raw, path);
}

// ---- plain-text key=value configuration ----

inline std::map<std::string, std::string> parse_config_text(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    auto b = s.find_first_not_of(ws);
    auto e = s.find_last_not_of(ws);
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  return parse_config_text(is);
}

}  // namespace platonic
