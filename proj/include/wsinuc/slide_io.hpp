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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wsinuc/geometry.hpp"
#include "wsinuc/raster.hpp"

namespace wsinuc {

struct PyramidLevel {
  double downsample = 1.0;
  int64_t width = 0;
  int64_t height = 0;
  friend bool operator==(const PyramidLevel&, const PyramidLevel&) = default;
};

// Slide area in square millimetres.
inline double slide_area_mm2(int64_t width_px, int64_t height_px, double mpp) {
  return static_cast<double>(width_px) * static_cast<double>(height_px) * mpp * mpp / 1e6;
}

// A readable slide backed by a file (pyramidal TIFF or single-level PNG)
// or by an in-memory raster. A handle serializes its own region reads;
// use reopen() to give each worker an independent handle.
class SlideSource {
 public:
  class Backend;

  // Opens a pyramidal TIFF or a PNG. The resolution comes from the file's
  // metadata unless `mpp_override` is given; a file with neither is rejected.
  static SlideSource open(const std::filesystem::path& path,
                          std::optional<double> mpp_override = std::nullopt);
  // Single-level slide backed by an in-memory raster.
  static SlideSource from_raster(RasterImage image, double mpp, std::string name = "memory");

  SlideSource(SlideSource&&) noexcept;
  SlideSource& operator=(SlideSource&&) noexcept;
  ~SlideSource();

  SlideSource reopen() const;

  int64_t width() const { return levels_.front().width; }
  int64_t height() const { return levels_.front().height; }
  double mpp() const { return mpp_; }
  const std::vector<PyramidLevel>& levels() const { return levels_; }
  const std::string& name() const { return name_; }
  double area_mm2() const { return slide_area_mm2(width(), height(), mpp_); }

  // Reads a (size_w x size_h) region of `level`, with its top-left corner
  // given in level-0 pixels. Pixels outside the slide are white.
  RasterImage read_region(int64_t x_l0, int64_t y_l0, int size_w, int size_h, int level = 0) const;

  // Reads the level-0 rectangle `rect` resampled (area average) to
  // out_w x out_h, from the coarsest level that still has enough resolution.
  RasterImage read_region_scaled(const Rect& rect, int out_w, int out_h) const;

  // Hex SHA-256 of the file bytes, or of the pixel buffer for in-memory slides.
  std::string content_hash() const;

 private:
  SlideSource(std::shared_ptr<Backend> backend, std::vector<PyramidLevel> levels, double mpp,
              std::string name);

  std::shared_ptr<Backend> backend_;
  std::vector<PyramidLevel> levels_;
  double mpp_ = 0;
  std::string name_;
};

struct Thumbnail {
  RasterImage image;
  // Level-0 pixels per thumbnail pixel, horizontally (width_l0 / thumb_width)
  // and vertically.
  double scale = 1.0;
  double scale_y = 1.0;
};

// Longest side <= max_dim, aspect ratio preserved. max_dim must be >= 16.
Thumbnail thumbnail(const SlideSource& slide, int max_dim);

// Validates a level list: downsample strictly increasing from 1 and every
// level's dims = ceil(level-0 dims / downsample). Throws IoError.
void validate_pyramid(const std::vector<PyramidLevel>& levels);

struct TiffWriteOptions {
  std::vector<int> downsamples = {1, 4, 16};
  int tile_size = 256;
  bool compress = true;
};

// Writes `level0` as a tiled pyramidal TIFF with the resolution stored in
// XResolution/YResolution (pixels per centimetre).
void write_pyramidal_tiff(const std::filesystem::path& path, const RasterImage& level0, double mpp,
                          const TiffWriteOptions& options = {});

}  // namespace wsinuc
