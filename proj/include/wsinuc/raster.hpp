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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace wsinuc {

// 8-bit interleaved RGB image, row-major.
class RasterImage {
 public:
  RasterImage() = default;
  // Filled with `fill` on every channel.
  RasterImage(int width, int height, uint8_t fill = 255);
  RasterImage(int width, int height, std::vector<uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  std::span<uint8_t> pixels() { return pixels_; }
  std::span<const uint8_t> pixels() const { return pixels_; }
  std::vector<uint8_t>&& release() && { return std::move(pixels_); }

  uint8_t* row(int y) { return pixels_.data() + static_cast<size_t>(y) * width_ * 3; }
  const uint8_t* row(int y) const { return pixels_.data() + static_cast<size_t>(y) * width_ * 3; }
  uint8_t* at(int x, int y) { return row(y) + static_cast<size_t>(x) * 3; }
  const uint8_t* at(int x, int y) const { return row(y) + static_cast<size_t>(x) * 3; }

  // Copies the (x, y, w, h) sub-rectangle; parts outside the image are white.
  RasterImage crop(int x, int y, int w, int h) const;
  // Writes `src` with its top-left corner at (x, y), clipping to this image.
  void paste(const RasterImage& src, int x, int y);

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> pixels_;
};

// Area-averaging resample to (out_w, out_h). Exact copy when dims match.
RasterImage resize_area(const RasterImage& src, int out_w, int out_h);

// Area-averaging resample of the source sub-rectangle [sx0, sx0 + sw) x
// [sy0, sy0 + sh) (source pixel units, may be fractional) to out_w x out_h.
// Source area outside the image counts as white.
RasterImage resample_area(const RasterImage& src, double sx0, double sy0, double sw, double sh,
                          int out_w, int out_h);

// Bilinear resample of the source sub-rectangle [sx0, sx0 + sw) x [sy0, sy0 + sh)
// (source pixel units, may be fractional) to out_w x out_h. Out-of-image
// samples are white. Identity when the rectangle is the whole image and the
// output size equals it.
RasterImage resample_bilinear(const RasterImage& src, double sx0, double sy0, double sw,
                              double sh, int out_w, int out_h);

RasterImage read_png(const std::filesystem::path& path);
// Physical resolution stored in the PNG pHYs chunk, if present in meters.
std::optional<double> read_png_mpp(const std::filesystem::path& path);
// Writes an 8-bit RGB PNG. `mpp` (when set) is stored in pHYs.
void write_png(const std::filesystem::path& path, const RasterImage& img,
               std::optional<double> mpp = std::nullopt, int compression_level = 6);
// 8-bit grayscale PNG from a 0/1 (or 0..255) byte grid.
void write_png_gray(const std::filesystem::path& path, int width, int height,
                    std::span<const uint8_t> values);

}  // namespace wsinuc
