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

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "wsinuc/raster.hpp"

namespace wsinuc {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

// Optical-density stain vectors, one unit-norm row per stain
// (hematoxylin, eosin, DAB). OD (row vector) = densities * rows.
class StainMatrix {
 public:
  // Ruifrok & Johnson H&E-DAB vectors, each row normalized.
  static StainMatrix ruifrok_johnson();
  // Rows are normalized to unit length; throws UsageError when a row is zero
  // or the matrix is ill-conditioned (condition number >= 1e6).
  static StainMatrix from_rows(const Mat3& rows);

  const Mat3& rows() const { return rows_; }
  const Mat3& inverse() const { return inverse_; }
  // Frobenius-norm condition number estimate, an upper bound on the 2-norm one.
  double condition_number() const;

  Vec3 densities_from_od(const Vec3& od) const;
  Vec3 od_from_densities(const Vec3& densities) const;

 private:
  explicit StainMatrix(const Mat3& rows);
  Mat3 rows_{};
  Mat3 inverse_{};
};

// -log10((v + 1) / 255) for one channel value.
double optical_density(double channel);
// Inverse of optical_density before clipping and rounding: 255 * 10^-od - 1.
double channel_from_od(double od);

// Per-pixel stain densities stored as three planes.
struct HedImage {
  int width = 0;
  int height = 0;
  std::vector<float> h;
  std::vector<float> e;
  std::vector<float> d;

  HedImage() = default;
  HedImage(int w, int h_, float fill = 0.0f);
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  std::array<float, 3> at(int x, int y) const {
    const size_t i = static_cast<size_t>(y) * width + x;
    return {h[i], e[i], d[i]};
  }
};

HedImage rgb_to_hed(const RasterImage& img, const StainMatrix& m);
RasterImage hed_to_rgb(const HedImage& hed, const StainMatrix& m);

struct TissueThresholds {
  // A mask pixel is tissue when any channel density reaches its threshold.
  // DAB is disabled by default.
  Vec3 density = {0.05, 0.05, std::numeric_limits<double>::infinity()};
  int open_radius = 2;
  int close_radius = 2;
};

// Binary tissue map at thumbnail resolution.
struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;
  // Level-0 pixels per mask pixel along x and y.
  double scale = 1.0;
  double scale_y = 1.0;

  bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
  size_t count() const;
  double fraction() const;
};

// Threshold only, no morphology.
TissueMask threshold_tissue(const HedImage& hed, const Vec3& thresholds);
TissueMask compute_tissue_mask(const RasterImage& thumb, double scale, double scale_y,
                               const StainMatrix& m, const TissueThresholds& thresholds);

// Binary morphology with a disk of the given radius. Erosion treats the
// outside as set and dilation as unset, so borders are not eroded away.
std::vector<uint8_t> erode(const std::vector<uint8_t>& bits, int width, int height, int radius);
std::vector<uint8_t> dilate(const std::vector<uint8_t>& bits, int width, int height, int radius);

// Per-channel stain perturbation: c' = c * scale[k] + shift[k].
struct HedPerturbation {
  Vec3 scale = {1, 1, 1};
  Vec3 shift = {0, 0, 0};
};

// Draws scale = 1 + U(-alpha, alpha) and shift = U(-beta, beta) per channel.
HedPerturbation draw_hed_perturbation(double alpha, double beta, std::mt19937_64& rng);
RasterImage apply_hed_perturbation(const RasterImage& img, const HedPerturbation& p,
                                   const StainMatrix& m);
RasterImage hed_augment(const RasterImage& img, double alpha, double beta, std::mt19937_64& rng,
                        const StainMatrix& m = StainMatrix::ruifrok_johnson());

}  // namespace wsinuc
