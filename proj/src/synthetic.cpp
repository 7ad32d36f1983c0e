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

#include "wsinuc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <fmt/format.h>

#include "wsinuc/errors.hpp"
#include "wsinuc/slide_io.hpp"
#include "wsinuc/stainlab.hpp"

namespace wsinuc {
namespace {

constexpr double kQuantum = 8.0;  // coordinates are multiples of 1/8 px

double quantize_down(double v) { return std::floor(v * kQuantum) / kQuantum; }
double quantize_up(double v) { return std::ceil(v * kQuantum) / kQuantum; }
double quantize(double v) { return std::round(v * kQuantum) / kQuantum; }

std::array<uint8_t, 3> stain_color(const Vec3& densities) {
  const Vec3 od = StainMatrix::ruifrok_johnson().od_from_densities(densities);
  std::array<uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<uint8_t>(std::clamp(std::lround(channel_from_od(od[c])), 0L, 255L));
  }
  return rgb;
}

// Nuclear stain is darker toward the centre; bucketed by normalized radius^2.
constexpr int kShades = 16;
const std::array<std::array<uint8_t, 3>, kShades>& nucleus_shades() {
  static const auto shades = [] {
    std::array<std::array<uint8_t, 3>, kShades> s{};
    for (int i = 0; i < kShades; ++i) {
      const double rho2 = (i + 0.5) / kShades;
      s[i] = stain_color({0.55 + 0.35 * (1.0 - rho2), 0.10, 0.0});
    }
    return s;
  }();
  return shades;
}

struct Placed {
  double cx, cy, radius;
};

// Uniform grid over placed nuclei for the overlap test.
class PlacementGrid {
 public:
  explicit PlacementGrid(double cell) : cell_(cell) {}

  bool fits(double cx, double cy, double radius, double gap) const {
    const int64_t gx = cell_of(cx), gy = cell_of(cy);
    for (int64_t y = gy - 1; y <= gy + 1; ++y) {
      for (int64_t x = gx - 1; x <= gx + 1; ++x) {
        auto it = cells_.find(key(x, y));
        if (it == cells_.end()) continue;
        for (const Placed& p : it->second) {
          const double dx = p.cx - cx, dy = p.cy - cy;
          const double min_d = p.radius + radius + gap;
          if (dx * dx + dy * dy < min_d * min_d) return false;
        }
      }
    }
    return true;
  }

  void add(const Placed& p) { cells_[key(cell_of(p.cx), cell_of(p.cy))].push_back(p); }

 private:
  int64_t cell_of(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }
  static int64_t key(int64_t x, int64_t y) { return (x << 32) ^ (y & 0xffffffff); }

  double cell_;
  std::unordered_map<int64_t, std::vector<Placed>> cells_;
};

}  // namespace

void SyntheticSlideSpec::validate() const {
  if (width <= 0 || height <= 0) throw UsageError("synthetic slide dimensions must be positive");
  if (!(mpp > 0)) throw UsageError("synthetic slide mpp must be positive");
  if (nucleus_count < 0) throw UsageError("nucleus_count must be >= 0");
  if (!(diameter_min > 0) || diameter_max < diameter_min) {
    throw UsageError("nucleus diameters must satisfy 0 < min <= max");
  }
  if (class_weights.empty()) throw UsageError("class_weights must not be empty");
  double sum = 0;
  for (double w : class_weights) {
    if (!(w >= 0)) throw UsageError("class weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw UsageError(fmt::format("class weights sum to {}, not 1", sum));
  if (max_attempts < 1) throw UsageError("max_attempts must be >= 1");
  if (min_gap < 0) throw UsageError("min_gap must be >= 0");
  if (tissue_inset < 0 || 2 * tissue_inset >= std::min(width, height)) {
    throw UsageError("tissue_inset leaves no tissue area");
  }
}

SyntheticSlide generate_synthetic_slide(const SyntheticSlideSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> diameter(spec.diameter_min, spec.diameter_max);
  std::discrete_distribution<int> klass(spec.class_weights.begin(), spec.class_weights.end());

  SyntheticSlide out;
  out.annotations.mpp = spec.mpp;
  out.annotations.records.reserve(spec.nucleus_count);
  PlacementGrid grid(spec.diameter_max + spec.min_gap);
  const double inset = spec.tissue_inset;

  for (int i = 0; i < spec.nucleus_count; ++i) {
    const double w = std::max(quantize(diameter(rng)), 1.0 / kQuantum);
    const double h = std::max(quantize(diameter(rng)), 1.0 / kQuantum);
    const double radius = std::max(w, h) / 2;
    const double x_lo = quantize_up(inset + radius), x_hi = quantize_down(spec.width - inset - radius);
    const double y_lo = quantize_up(inset + radius), y_hi = quantize_down(spec.height - inset - radius);
    if (x_hi < x_lo || y_hi < y_lo) throw UsageError("nucleus diameter does not fit in the slide");
    std::uniform_real_distribution<double> ux(x_lo, x_hi), uy(y_lo, y_hi);
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const double cx = std::clamp(quantize(ux(rng)), x_lo, x_hi);
      const double cy = std::clamp(quantize(uy(rng)), y_lo, y_hi);
      if (!grid.fits(cx, cy, radius, spec.min_gap)) continue;
      grid.add({cx, cy, radius});
      Annotation a{cx, cy, w, h, klass(rng), std::nullopt};
      if (!spec.tissue_names.empty()) {
        const auto band = std::min<size_t>(static_cast<size_t>(cx / spec.width * spec.tissue_names.size()),
                                           spec.tissue_names.size() - 1);
        a.tissue = spec.tissue_names[band];
      }
      out.annotations.records.push_back(std::move(a));
      placed = true;
    }
    if (!placed) {
      throw UsageError(fmt::format("too dense: could not place nucleus {} of {} within {} attempts", i + 1,
                                   spec.nucleus_count, spec.max_attempts));
    }
  }

  RasterImage img(spec.width, spec.height, 255);
  if (!spec.blank) {
    const auto eosin = stain_color({0.0, 0.30, 0.0});
    for (int y = spec.tissue_inset; y < spec.height - spec.tissue_inset; ++y) {
      uint8_t* p = img.at(spec.tissue_inset, y);
      for (int x = spec.tissue_inset; x < spec.width - spec.tissue_inset; ++x, p += 3) {
        p[0] = eosin[0];
        p[1] = eosin[1];
        p[2] = eosin[2];
      }
    }
  }
  const auto& shades = nucleus_shades();
  for (const auto& a : out.annotations.records) {
    const double rx = a.w / 2, ry = a.h / 2;
    const int x0 = std::max(0, static_cast<int>(std::floor(a.cx - rx)));
    const int x1 = std::min(spec.width, static_cast<int>(std::ceil(a.cx + rx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(a.cy - ry)));
    const int y1 = std::min(spec.height, static_cast<int>(std::ceil(a.cy + ry)));
    for (int y = y0; y < y1; ++y) {
      const double ny = (y + 0.5 - a.cy) / ry;
      for (int x = x0; x < x1; ++x) {
        const double nx = (x + 0.5 - a.cx) / rx;
        const double rho2 = nx * nx + ny * ny;
        if (rho2 > 1.0) continue;
        const auto& c = shades[std::min(kShades - 1, static_cast<int>(rho2 * kShades))];
        std::copy(c.begin(), c.end(), img.at(x, y));
      }
    }
  }
  out.image = std::move(img);
  return out;
}

void write_synthetic_slide(const SyntheticSlide& slide, double mpp,
                           const std::filesystem::path& slide_path,
                           const std::filesystem::path& annotation_path) {
  auto ext = slide_path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".tif" || ext == ".tiff") {
    write_pyramidal_tiff(slide_path, slide.image, mpp);
  } else if (ext == ".png") {
    write_png(slide_path, slide.image, mpp);
  } else {
    throw UsageError("synthetic slide path must end in .png, .tif or .tiff");
  }
  write_annotations_jsonl(annotation_path, slide.annotations);
}

}  // namespace wsinuc
