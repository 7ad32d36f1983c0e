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

#include "wsinuc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "wsinuc/errors.hpp"
#include "wsinuc/kernels/kernels.hpp"

namespace wsinuc {

AugmentationParams AugmentationParams::disabled() {
  AugmentationParams p;
  p.elastic.p = 0;
  p.hflip_p = 0;
  p.vflip_p = 0;
  p.rotate.p = 0;
  p.blur.p = 0;
  p.hed.p = 0;
  p.resized_crop.p = 0;
  return p;
}

void AugmentationParams::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) throw UsageError(std::string("augmentation probability out of [0,1]: ") + name);
  };
  prob(elastic.p, "elastic");
  prob(hflip_p, "hflip");
  prob(vflip_p, "vflip");
  prob(rotate.p, "rotate");
  prob(blur.p, "blur");
  prob(hed.p, "hed");
  prob(resized_crop.p, "resized_crop");
  if (elastic.alpha < 0 || elastic.sigma < 0) throw UsageError("elastic alpha/sigma must be >= 0");
  if (hed.alpha < 0 || hed.beta < 0) throw UsageError("hed alpha/beta must be >= 0");
  if (blur.sigma_min < 0 || blur.sigma_max < blur.sigma_min) throw UsageError("invalid blur sigma range");
  if (blur.kernel_size < 1 || blur.kernel_size % 2 == 0) throw UsageError("blur kernel size must be odd");
  if (rotate.angles.empty()) throw UsageError("rotate needs at least one angle");
  for (int a : rotate.angles) {
    if (a % 90 != 0) throw UsageError("rotation angles must be multiples of 90");
  }
  if (resized_crop.size <= 0) throw UsageError("resized_crop size must be positive");
  if (!(resized_crop.scale_min > 0) || resized_crop.scale_max > 1 ||
      resized_crop.scale_max < resized_crop.scale_min) {
    throw UsageError("resized_crop scale must satisfy 0 < min <= max <= 1");
  }
}

Augmented hflip(const RasterImage& img, std::span<const AugBox> boxes) {
  Augmented out{RasterImage(img.width(), img.height(), 0), {boxes.begin(), boxes.end()}};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::copy_n(img.at(img.width() - 1 - x, y), 3, out.image.at(x, y));
    }
  }
  for (auto& b : out.boxes) b.cx = img.width() - b.cx;
  return out;
}

Augmented vflip(const RasterImage& img, std::span<const AugBox> boxes) {
  Augmented out{RasterImage(img.width(), img.height(), 0), {boxes.begin(), boxes.end()}};
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(img.row(img.height() - 1 - y), static_cast<size_t>(img.width()) * 3, out.image.row(y));
  }
  for (auto& b : out.boxes) b.cy = img.height() - b.cy;
  return out;
}

Augmented rotate90(const RasterImage& img, std::span<const AugBox> boxes, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  Augmented cur{img, {boxes.begin(), boxes.end()}};
  for (int t = 0; t < quarter_turns; ++t) {
    const int w = cur.image.width(), h = cur.image.height();
    // Input (x, y) lands at (y, w - 1 - x).
    RasterImage rotated(h, w, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) std::copy_n(cur.image.at(x, y), 3, rotated.at(y, w - 1 - x));
    }
    for (auto& b : cur.boxes) {
      const double cx = b.cx, cy = b.cy;
      b.cx = cy;
      b.cy = w - cx;
      std::swap(b.w, b.h);
    }
    cur.image = std::move(rotated);
  }
  return cur;
}

Augmented resized_crop(const RasterImage& img, std::span<const AugBox> boxes, double x0, double y0,
                       double side_w, double side_h, int size) {
  if (!(side_w > 0 && side_h > 0) || size <= 0) throw UsageError("resized_crop: empty crop");
  Augmented out{resample_bilinear(img, x0, y0, side_w, side_h, size, size), {}};
  const double sx = size / side_w, sy = size / side_h;
  const double x1 = x0 + side_w, y1 = y0 + side_h;
  for (AugBox b : boxes) {
    double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
    if (bx0 < x0 || bx1 > x1 || by0 < y0 || by1 > y1) {
      bx0 = std::max(bx0, x0);
      bx1 = std::min(bx1, x1);
      by0 = std::max(by0, y0);
      by1 = std::min(by1, y1);
      if (!(bx1 > bx0 && by1 > by0)) continue;
      b.cx = (bx0 + bx1) / 2;
      b.cy = (by0 + by1) / 2;
      b.w = bx1 - bx0;
      b.h = by1 - by0;
    }
    b.cx = (b.cx - x0) * sx;
    b.cy = (b.cy - y0) * sy;
    b.w *= sx;
    b.h *= sy;
    out.boxes.push_back(b);
  }
  return out;
}

std::vector<float> gaussian_taps(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw UsageError("kernel size must be odd");
  if (!(sigma > 0)) throw UsageError("gaussian sigma must be positive");
  const int r = kernel_size / 2;
  std::vector<double> w(kernel_size);
  double sum = 0;
  for (int k = -r; k <= r; ++k) sum += w[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
  std::vector<float> taps(kernel_size);
  for (int i = 0; i < kernel_size; ++i) taps[i] = static_cast<float>(w[i] / sum);
  return taps;
}

namespace {

void blur_plane(std::vector<float>& plane, int width, int height, const std::vector<float>& taps) {
  const auto& k = kernels::active();
  const int radius = static_cast<int>(taps.size() / 2);
  std::vector<float> tmp(plane.size());
  k.convolve_rows(plane.data(), tmp.data(), width, height, taps.data(), radius);
  k.convolve_cols(tmp.data(), plane.data(), width, height, taps.data(), radius);
}

}  // namespace

RasterImage gaussian_blur(const RasterImage& img, int kernel_size, double sigma) {
  const auto taps = gaussian_taps(kernel_size, sigma);
  const size_t n = img.pixel_count();
  const auto px = img.pixels();
  RasterImage out(img.width(), img.height(), 0);
  std::vector<float> plane(n);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < n; ++i) plane[i] = px[3 * i + c];
    blur_plane(plane, img.width(), img.height(), taps);
    auto dst = out.pixels();
    for (size_t i = 0; i < n; ++i) {
      dst[3 * i + c] = static_cast<uint8_t>(std::clamp(std::nearbyint(plane[i]), 0.0f, 255.0f));
    }
  }
  return out;
}

Augmented elastic(const RasterImage& img, std::span<const AugBox> boxes, double alpha, double sigma,
                  std::mt19937_64& rng) {
  const int w = img.width(), h = img.height();
  const size_t n = img.pixel_count();
  std::vector<float> dx(n), dy(n);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (size_t i = 0; i < n; ++i) dx[i] = u(rng);
  for (size_t i = 0; i < n; ++i) dy[i] = u(rng);
  if (sigma > 0) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    const auto taps = gaussian_taps(2 * radius + 1, sigma);
    blur_plane(dx, w, h, taps);
    blur_plane(dy, w, h, taps);
  }
  for (size_t i = 0; i < n; ++i) {
    dx[i] *= static_cast<float>(alpha);
    dy[i] *= static_cast<float>(alpha);
  }

  Augmented out{RasterImage(w, h, 255), {}};
  auto sample = [&](int x, int y, int c) -> double {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return img.at(x, y)[c];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const double sx = x + dx[i], sy = y + dy[i];
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      uint8_t* dst = out.image.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = sample(x0, y0, c) * (1 - fx) + sample(x0 + 1, y0, c) * fx;
        const double bot = sample(x0, y0 + 1, c) * (1 - fx) + sample(x0 + 1, y0 + 1, c) * fx;
        dst[c] = static_cast<uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
      }
    }
  }
  // Output pixel p samples input p + d(p), so content at q moves to about q - d(q).
  for (AugBox b : boxes) {
    const int px = std::clamp(static_cast<int>(std::floor(b.cx)), 0, w - 1);
    const int py = std::clamp(static_cast<int>(std::floor(b.cy)), 0, h - 1);
    const size_t i = static_cast<size_t>(py) * w + px;
    b.cx = std::clamp(b.cx - dx[i], 0.0, static_cast<double>(w) - 1e-6);
    b.cy = std::clamp(b.cy - dy[i], 0.0, static_cast<double>(h) - 1e-6);
    out.boxes.push_back(b);
  }
  return out;
}

Augmented apply_augmentations(const RasterImage& img, std::span<const AugBox> boxes,
                              const AugmentationParams& params, std::mt19937_64& rng,
                              const StainMatrix& stains) {
  params.validate();
  for (const auto& b : boxes) {
    if (b.cx < 0 || b.cy < 0 || b.cx > img.width() || b.cy > img.height()) {
      throw UsageError("augmentation box centroid outside the image");
    }
  }
  auto coin = [&rng](double p) { return std::bernoulli_distribution(p)(rng); };
  Augmented cur{img, {boxes.begin(), boxes.end()}};

  if (coin(params.elastic.p)) {
    cur = elastic(cur.image, cur.boxes, params.elastic.alpha, params.elastic.sigma, rng);
  }
  if (coin(params.hflip_p)) cur = hflip(cur.image, cur.boxes);
  if (coin(params.vflip_p)) cur = vflip(cur.image, cur.boxes);
  if (coin(params.rotate.p)) {
    const auto& angles = params.rotate.angles;
    const int angle = angles[std::uniform_int_distribution<size_t>(0, angles.size() - 1)(rng)];
    cur = rotate90(cur.image, cur.boxes, angle / 90);
  }
  if (coin(params.blur.p)) {
    const double sigma =
        std::uniform_real_distribution<double>(params.blur.sigma_min, params.blur.sigma_max)(rng);
    if (sigma > 0) cur.image = gaussian_blur(cur.image, params.blur.kernel_size, sigma);
  }
  if (coin(params.hed.p)) {
    cur.image = hed_augment(cur.image, params.hed.alpha, params.hed.beta, rng, stains);
  }
  if (coin(params.resized_crop.p)) {
    const double w = cur.image.width(), h = cur.image.height();
    const double scale = std::uniform_real_distribution<double>(params.resized_crop.scale_min,
                                                                params.resized_crop.scale_max)(rng);
    const double side = std::min({std::sqrt(scale * w * h), w, h});
    const double x0 = std::uniform_real_distribution<double>(0.0, w - side)(rng);
    const double y0 = std::uniform_real_distribution<double>(0.0, h - side)(rng);
    cur = resized_crop(cur.image, cur.boxes, x0, y0, side, side, params.resized_crop.size);
  }
  return cur;
}

}  // namespace wsinuc
