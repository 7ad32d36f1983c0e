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

#include "wsinuc/stainlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsinuc/errors.hpp"
#include "wsinuc/kernels/kernels.hpp"

namespace wsinuc {
namespace {

Mat3 invert(const Mat3& a) {
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  if (std::abs(det) < 1e-12) throw UsageError("stain matrix is singular");
  Mat3 inv{};
  inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return inv;
}

double frobenius(const Mat3& a) {
  double s = 0;
  for (const auto& row : a)
    for (double v : row) s += v * v;
  return std::sqrt(s);
}

// Row-vector times matrix, as a flat float array for the kernels.
std::array<float, 9> flat(const Mat3& m) {
  std::array<float, 9> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[3 * r + c] = static_cast<float>(m[r][c]);
  return out;
}

}  // namespace

StainMatrix::StainMatrix(const Mat3& rows) : rows_(rows), inverse_(invert(rows)) {}

StainMatrix StainMatrix::ruifrok_johnson() {
  static const StainMatrix m = from_rows({{{0.65, 0.70, 0.29},  // hematoxylin
                                           {0.07, 0.99, 0.11},  // eosin
                                           {0.27, 0.57, 0.78}}});  // DAB
  return m;
}

StainMatrix StainMatrix::from_rows(const Mat3& rows) {
  Mat3 unit = rows;
  for (auto& row : unit) {
    const double n = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
    if (!(n > 0)) throw UsageError("stain vector has zero length");
    for (double& v : row) v /= n;
  }
  StainMatrix m(unit);
  if (!(m.condition_number() < 1e6)) throw UsageError("stain matrix is ill-conditioned");
  return m;
}

double StainMatrix::condition_number() const { return frobenius(rows_) * frobenius(inverse_); }

Vec3 StainMatrix::densities_from_od(const Vec3& od) const {
  Vec3 d{};
  for (int j = 0; j < 3; ++j) d[j] = od[0] * inverse_[0][j] + od[1] * inverse_[1][j] + od[2] * inverse_[2][j];
  return d;
}

Vec3 StainMatrix::od_from_densities(const Vec3& dens) const {
  Vec3 od{};
  for (int j = 0; j < 3; ++j) od[j] = dens[0] * rows_[0][j] + dens[1] * rows_[1][j] + dens[2] * rows_[2][j];
  return od;
}

double optical_density(double channel) { return -std::log10((channel + 1.0) / 255.0); }
double channel_from_od(double od) { return 255.0 * std::pow(10.0, -od) - 1.0; }

HedImage::HedImage(int w, int h_, float fill)
    : width(w), height(h_), h(pixel_count(), fill), e(pixel_count(), fill), d(pixel_count(), fill) {}

HedImage rgb_to_hed(const RasterImage& img, const StainMatrix& m) {
  const auto& k = kernels::active();
  HedImage out(img.width(), img.height());
  const size_t n = out.pixel_count();
  std::vector<float> r(n), g(n), b(n);
  k.rgb_to_od(img.pixels().data(), n, r.data(), g.data(), b.data());
  const auto inv = flat(m.inverse());
  k.mix3(r.data(), g.data(), b.data(), n, inv.data(), out.h.data(), out.e.data(), out.d.data());
  return out;
}

RasterImage hed_to_rgb(const HedImage& hed, const StainMatrix& m) {
  const auto& k = kernels::active();
  const size_t n = hed.pixel_count();
  std::vector<float> r(n), g(n), b(n);
  const auto fwd = flat(m.rows());
  k.mix3(hed.h.data(), hed.e.data(), hed.d.data(), n, fwd.data(), r.data(), g.data(), b.data());
  RasterImage out(hed.width, hed.height, 0);
  k.od_to_rgb(r.data(), g.data(), b.data(), n, out.pixels().data());
  return out;
}

size_t TissueMask::count() const { return static_cast<size_t>(std::count(bits.begin(), bits.end(), 1)); }

double TissueMask::fraction() const {
  return bits.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits.size());
}

TissueMask threshold_tissue(const HedImage& hed, const Vec3& thresholds) {
  for (double t : thresholds) {
    if (!(t >= 0)) throw UsageError("tissue thresholds must be >= 0");
  }
  TissueMask mask;
  mask.width = hed.width;
  mask.height = hed.height;
  mask.bits.resize(hed.pixel_count());
  const std::array<float, 3> t = {static_cast<float>(thresholds[0]), static_cast<float>(thresholds[1]),
                                   static_cast<float>(thresholds[2])};
  kernels::active().threshold_any3(hed.h.data(), hed.e.data(), hed.d.data(), hed.pixel_count(),
                                   t.data(), mask.bits.data());
  return mask;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dx, dy);
  return offsets;
}

std::vector<uint8_t> morph(const std::vector<uint8_t>& bits, int width, int height, int radius,
                           bool erosion) {
  if (radius <= 0) return bits;
  const auto offsets = disk_offsets(radius);
  std::vector<uint8_t> out(bits.size());
  // Erosion: all in-bounds neighbours set. Dilation: any neighbour set.
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool acc = erosion;
      for (const auto& [dx, dy] : offsets) {
        const int sx = x + dx, sy = y + dy;
        if (sx < 0 || sy < 0 || sx >= width || sy >= height) continue;
        const bool v = bits[static_cast<size_t>(sy) * width + sx] != 0;
        if (erosion && !v) {
          acc = false;
          break;
        }
        if (!erosion && v) {
          acc = true;
          break;
        }
      }
      out[static_cast<size_t>(y) * width + x] = acc ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

std::vector<uint8_t> erode(const std::vector<uint8_t>& bits, int width, int height, int radius) {
  return morph(bits, width, height, radius, true);
}

std::vector<uint8_t> dilate(const std::vector<uint8_t>& bits, int width, int height, int radius) {
  return morph(bits, width, height, radius, false);
}

TissueMask compute_tissue_mask(const RasterImage& thumb, double scale, double scale_y,
                               const StainMatrix& m, const TissueThresholds& thresholds) {
  if (thresholds.open_radius < 0 || thresholds.close_radius < 0) {
    throw UsageError("morphology radii must be >= 0");
  }
  TissueMask mask = threshold_tissue(rgb_to_hed(thumb, m), thresholds.density);
  mask.scale = scale;
  mask.scale_y = scale_y;
  const int w = mask.width, h = mask.height;
  // Opening removes specks, closing fills small holes.
  mask.bits = dilate(erode(mask.bits, w, h, thresholds.open_radius), w, h, thresholds.open_radius);
  mask.bits = erode(dilate(mask.bits, w, h, thresholds.close_radius), w, h, thresholds.close_radius);
  return mask;
}

HedPerturbation draw_hed_perturbation(double alpha, double beta, std::mt19937_64& rng) {
  if (!(alpha >= 0) || !(beta >= 0)) throw UsageError("HED alpha and beta must be >= 0");
  HedPerturbation p;
  for (int k = 0; k < 3; ++k) {
    p.scale[k] = 1.0 + std::uniform_real_distribution<double>(-alpha, alpha)(rng);
    p.shift[k] = std::uniform_real_distribution<double>(-beta, beta)(rng);
  }
  return p;
}

RasterImage apply_hed_perturbation(const RasterImage& img, const HedPerturbation& p,
                                   const StainMatrix& m) {
  HedImage hed = rgb_to_hed(img, m);
  std::vector<float>* planes[3] = {&hed.h, &hed.e, &hed.d};
  for (int k = 0; k < 3; ++k) {
    const auto s = static_cast<float>(p.scale[k]);
    const auto t = static_cast<float>(p.shift[k]);
    for (float& v : *planes[k]) v = v * s + t;
  }
  return hed_to_rgb(hed, m);
}

RasterImage hed_augment(const RasterImage& img, double alpha, double beta, std::mt19937_64& rng,
                        const StainMatrix& m) {
  return apply_hed_perturbation(img, draw_hed_perturbation(alpha, beta, rng), m);
}

}  // namespace wsinuc
