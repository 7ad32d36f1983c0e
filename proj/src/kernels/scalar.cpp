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

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace wsinuc::kernels {
namespace {

void rgb_to_od_scalar(const uint8_t* rgb, size_t n, float* od_r, float* od_g, float* od_b) {
  for (size_t i = 0; i < n; ++i) {
    od_r[i] = optical_density(rgb[3 * i + 0]);
    od_g[i] = optical_density(rgb[3 * i + 1]);
    od_b[i] = optical_density(rgb[3 * i + 2]);
  }
}

void mix3_scalar(const float* in0, const float* in1, const float* in2, size_t n, const float* m,
                 float* out0, float* out1, float* out2) {
  for (size_t i = 0; i < n; ++i) {
    const float a = in0[i], b = in1[i], c = in2[i];
    const float r0 = a * m[0] + b * m[3] + c * m[6];
    const float r1 = a * m[1] + b * m[4] + c * m[7];
    const float r2 = a * m[2] + b * m[5] + c * m[8];
    out0[i] = r0;
    out1[i] = r1;
    out2[i] = r2;
  }
}

inline uint8_t od_to_level(float od) {
  const double v = 255.0 * std::pow(10.0, -static_cast<double>(od)) - 1.0;
  return static_cast<uint8_t>(std::nearbyint(std::clamp(v, 0.0, 255.0)));
}

void od_to_rgb_scalar(const float* od_r, const float* od_g, const float* od_b, size_t n,
                      uint8_t* rgb) {
  for (size_t i = 0; i < n; ++i) {
    rgb[3 * i + 0] = od_to_level(od_r[i]);
    rgb[3 * i + 1] = od_to_level(od_g[i]);
    rgb[3 * i + 2] = od_to_level(od_b[i]);
  }
}

void threshold_any3_scalar(const float* c0, const float* c1, const float* c2, size_t n,
                           const float* t, uint8_t* mask) {
  for (size_t i = 0; i < n; ++i) {
    mask[i] = (c0[i] >= t[0] || c1[i] >= t[1] || c2[i] >= t[2]) ? 1 : 0;
  }
}

void convolve_rows_scalar(const float* src, float* dst, int width, int height, const float* taps,
                          int radius) {
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<size_t>(y) * width;
    float* out = dst + static_cast<size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        const int sx = std::clamp(x + k, 0, width - 1);
        acc = acc + taps[k + radius] * row[sx];
      }
      out[x] = acc;
    }
  }
}

void convolve_cols_scalar(const float* src, float* dst, int width, int height, const float* taps,
                          int radius) {
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        const int sy = std::clamp(y + k, 0, height - 1);
        acc = acc + taps[k + radius] * src[static_cast<size_t>(sy) * width + x];
      }
      out[x] = acc;
    }
  }
}

void pairwise_distance_scalar(const double* ax, const double* ay, size_t n, const double* bx,
                              const double* by, size_t m, double* out) {
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      const double dx = ax[i] - bx[j];
      const double dy = ay[i] - by[j];
      out[i * m + j] = std::sqrt(dx * dx + dy * dy);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      Isa::kScalar,          rgb_to_od_scalar,     mix3_scalar,
      od_to_rgb_scalar,      threshold_any3_scalar, convolve_rows_scalar,
      convolve_cols_scalar,  pairwise_distance_scalar,
  };
  return table;
}

}  // namespace wsinuc::kernels
