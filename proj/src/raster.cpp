// Copyright 2026 The wsinuc Authors. All Rights Reserved.
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

#include "wsinuc/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "wsinuc/errors.hpp"

namespace wsinuc {

RasterImage::RasterImage(int width, int height, uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw UsageError("negative image dimensions");
  pixels_.assign(static_cast<size_t>(width) * height * 3, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0) throw UsageError("negative image dimensions");
  if (pixels_.size() != static_cast<size_t>(width) * height * 3) {
    throw UsageError("pixel buffer length does not match width*height*3");
  }
}

RasterImage RasterImage::crop(int x, int y, int w, int h) const {
  RasterImage out(w, h, 255);
  const int sx0 = std::max(x, 0);
  const int sy0 = std::max(y, 0);
  const int sx1 = std::min(x + w, width_);
  const int sy1 = std::min(y + h, height_);
  if (sx1 <= sx0 || sy1 <= sy0) return out;
  const size_t run = static_cast<size_t>(sx1 - sx0) * 3;
  for (int sy = sy0; sy < sy1; ++sy) {
    std::copy_n(at(sx0, sy), run, out.at(sx0 - x, sy - y));
  }
  return out;
}

void RasterImage::paste(const RasterImage& src, int x, int y) {
  const int dx0 = std::max(x, 0);
  const int dy0 = std::max(y, 0);
  const int dx1 = std::min(x + src.width(), width_);
  const int dy1 = std::min(y + src.height(), height_);
  if (dx1 <= dx0 || dy1 <= dy0) return;
  const size_t run = static_cast<size_t>(dx1 - dx0) * 3;
  for (int dy = dy0; dy < dy1; ++dy) {
    std::copy_n(src.at(dx0 - x, dy - y), run, at(dx0, dy));
  }
}

RasterImage resize_area(const RasterImage& src, int out_w, int out_h) {
  if (out_w == src.width() && out_h == src.height()) return src;
  return resample_area(src, 0, 0, src.width(), src.height(), out_w, out_h);
}

namespace {

// Coverage weights of one output sample over the source axis. Indices may
// fall outside [0, n_src); those samples read as white.
struct Tap {
  int index;
  double weight;
};

std::vector<std::vector<Tap>> area_taps(int n_out, double s0, double extent) {
  std::vector<std::vector<Tap>> taps(n_out);
  const double f = extent / n_out;
  for (int o = 0; o < n_out; ++o) {
    const double a = s0 + o * f;
    const double b = s0 + (o + 1) * f;
    for (auto s = static_cast<int>(std::floor(a)); s < static_cast<int>(std::ceil(b)); ++s) {
      const double lo = std::max(a, static_cast<double>(s));
      const double hi = std::min(b, static_cast<double>(s + 1));
      if (hi > lo) taps[o].push_back({s, (hi - lo) / (b - a)});
    }
  }
  return taps;
}

}  // namespace

RasterImage resample_area(const RasterImage& src, double sx0, double sy0, double sw, double sh,
                          int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw UsageError("resample_area: empty output");
  if (!(sw > 0 && sh > 0)) throw UsageError("resample_area: empty source rectangle");
  if (sx0 == 0 && sy0 == 0 && sw == src.width() && sh == src.height() && out_w == src.width() &&
      out_h == src.height()) {
    return src;
  }
  RasterImage out(out_w, out_h, 255);
  const auto xt = area_taps(out_w, sx0, sw);
  const auto yt = area_taps(out_h, sy0, sh);

  std::vector<double> acc(static_cast<size_t>(out_w) * 3);
  for (int oy = 0; oy < out_h; ++oy) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const Tap& ty : yt[oy]) {
      const bool row_inside = ty.index >= 0 && ty.index < src.height();
      const uint8_t* row = row_inside ? src.row(ty.index) : nullptr;
      for (int ox = 0; ox < out_w; ++ox) {
        double r = 0, g = 0, b = 0;
        for (const Tap& tx : xt[ox]) {
          if (row_inside && tx.index >= 0 && tx.index < src.width()) {
            const uint8_t* p = row + static_cast<size_t>(tx.index) * 3;
            r += p[0] * tx.weight;
            g += p[1] * tx.weight;
            b += p[2] * tx.weight;
          } else {
            r += 255.0 * tx.weight;
            g += 255.0 * tx.weight;
            b += 255.0 * tx.weight;
          }
        }
        acc[ox * 3 + 0] += r * ty.weight;
        acc[ox * 3 + 1] += g * ty.weight;
        acc[ox * 3 + 2] += b * ty.weight;
      }
    }
    uint8_t* dst = out.row(oy);
    for (size_t i = 0; i < acc.size(); ++i) {
      dst[i] = static_cast<uint8_t>(std::clamp(std::lround(acc[i]), 0L, 255L));
    }
  }
  return out;
}

RasterImage resample_bilinear(const RasterImage& src, double sx0, double sy0, double sw,
                              double sh, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw UsageError("resample_bilinear: empty output");
  if (sx0 == 0 && sy0 == 0 && sw == src.width() && sh == src.height() &&
      out_w == src.width() && out_h == src.height()) {
    return src;
  }
  RasterImage out(out_w, out_h, 255);
  const double fx = sw / out_w;
  const double fy = sh / out_h;
  auto sample = [&](int x, int y, int c) -> double {
    if (x < 0 || y < 0 || x >= src.width() || y >= src.height()) return 255.0;
    return src.at(x, y)[c];
  };
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = sy0 + (oy + 0.5) * fy - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double wy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = sx0 + (ox + 0.5) * fx - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double wx = sx - x0;
      uint8_t* dst = out.at(ox, oy);
      for (int c = 0; c < 3; ++c) {
        const double top = sample(x0, y0, c) * (1 - wx) + sample(x0 + 1, y0, c) * wx;
        const double bot = sample(x0, y0 + 1, c) * (1 - wx) + sample(x0 + 1, y0 + 1, c) * wx;
        const double v = top * (1 - wy) + bot * wy;
        dst[c] = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;
  ~PngReader() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;
  ~PngWriter() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r.error, png_error_fn, png_warning_fn);
  if (!r.png) throw IoError("png: out of memory");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("png: out of memory");

  // Declared before setjmp so a longjmp never skips their destructors.
  std::vector<uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("png: " + path.string() + ": " + r.error);
  }
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(r.png);
  }
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  // Composite any alpha over white, the slide background colour.
  png_color_16 white{0, 0xffff, 0xffff, 0xffff, 0xffff};
  png_set_background(r.png, &white, PNG_BACKGROUND_GAMMA_SCREEN, 0, 1.0);
  png_read_update_info(r.png, r.info);
  if (png_get_channels(r.png, r.info) != 3) throw IoError("png: unexpected channel layout");

  pixels.resize(static_cast<size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return RasterImage(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

std::optional<double> read_png_mpp(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r.error, png_error_fn, png_warning_fn);
  r.info = png_create_info_struct(r.png);
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("png: " + path.string() + ": " + r.error);
  }
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  png_uint_32 res_x = 0, res_y = 0;
  int unit = 0;
  if (png_get_pHYs(r.png, r.info, &res_x, &res_y, &unit) && unit == PNG_RESOLUTION_METER &&
      res_x > 0) {
    return 1e6 / static_cast<double>(res_x);
  }
  return std::nullopt;
}

namespace {

void write_png_impl(const std::filesystem::path& path, int width, int height, int color_type,
                    int channels, std::span<const uint8_t> data, std::optional<double> mpp,
                    int compression_level) {
  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &wr.error, png_error_fn, png_warning_fn);
  if (!wr.png) throw IoError("png: out of memory");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("png: out of memory");
  if (setjmp(png_jmpbuf(wr.png))) {
    throw IoError("png: " + path.string() + ": " + wr.error);
  }
  png_init_io(wr.png, f.get());
  png_set_compression_level(wr.png, compression_level);
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (mpp) {
    const auto ppm = static_cast<png_uint_32>(std::lround(1e6 / *mpp));
    png_set_pHYs(wr.png, wr.info, ppm, ppm, PNG_RESOLUTION_METER);
  }
  png_write_info(wr.png, wr.info);
  const size_t stride = static_cast<size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(wr.png, const_cast<png_bytep>(data.data() + y * stride));
  }
  png_write_end(wr.png, nullptr);
}

}  // namespace

void write_png(const std::filesystem::path& path, const RasterImage& img, std::optional<double> mpp,
               int compression_level) {
  write_png_impl(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 3, img.pixels(), mpp,
                 compression_level);
}

void write_png_gray(const std::filesystem::path& path, int width, int height,
                    std::span<const uint8_t> values) {
  if (values.size() != static_cast<size_t>(width) * height) {
    throw UsageError("write_png_gray: buffer size mismatch");
  }
  write_png_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 1, values, std::nullopt, 6);
}

}  // namespace wsinuc
