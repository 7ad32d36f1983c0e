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

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace wsinuc::kernels {
namespace {

void rgb_to_od_avx2(const uint8_t* rgb, size_t n, float* od_r, float* od_g, float* od_b) {
  const float* lut = optical_density_lut().data();
  const __m256i lane = _mm256_setr_epi32(0, 3, 6, 9, 12, 15, 18, 21);
  const __m256i low_byte = _mm256_set1_epi32(0xff);
  float* planes[3] = {od_r, od_g, od_b};
  size_t i = 0;
  // The byte gathers read 4 bytes per lane, so stop one pixel early to stay
  // inside the buffer; the tail goes through the scalar path.
  for (; i + 9 <= n; i += 8) {
    const auto* base = reinterpret_cast<const int*>(rgb + 3 * i);
    for (int c = 0; c < 3; ++c) {
      const __m256i idx = _mm256_add_epi32(lane, _mm256_set1_epi32(c));
      __m256i bytes = _mm256_i32gather_epi32(base, idx, 1);
      bytes = _mm256_and_si256(bytes, low_byte);
      _mm256_storeu_ps(planes[c] + i, _mm256_i32gather_ps(lut, bytes, 4));
    }
  }
  for (; i < n; ++i) {
    od_r[i] = lut[rgb[3 * i + 0]];
    od_g[i] = lut[rgb[3 * i + 1]];
    od_b[i] = lut[rgb[3 * i + 2]];
  }
}

void mix3_avx2(const float* in0, const float* in1, const float* in2, size_t n, const float* m,
               float* out0, float* out1, float* out2) {
  __m256 mv[9];
  for (int k = 0; k < 9; ++k) mv[k] = _mm256_set1_ps(m[k]);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_loadu_ps(in0 + i);
    const __m256 b = _mm256_loadu_ps(in1 + i);
    const __m256 c = _mm256_loadu_ps(in2 + i);
    // Same association as the scalar reference: (a*m0 + b*m3) + c*m6.
    const __m256 r0 = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(a, mv[0]), _mm256_mul_ps(b, mv[3])),
                                    _mm256_mul_ps(c, mv[6]));
    const __m256 r1 = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(a, mv[1]), _mm256_mul_ps(b, mv[4])),
                                    _mm256_mul_ps(c, mv[7]));
    const __m256 r2 = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(a, mv[2]), _mm256_mul_ps(b, mv[5])),
                                    _mm256_mul_ps(c, mv[8]));
    _mm256_storeu_ps(out0 + i, r0);
    _mm256_storeu_ps(out1 + i, r1);
    _mm256_storeu_ps(out2 + i, r2);
  }
  for (; i < n; ++i) {
    const float a = in0[i], b = in1[i], c = in2[i];
    const float r0 = a * m[0] + b * m[3] + c * m[6];
    const float r1 = a * m[1] + b * m[4] + c * m[7];
    const float r2 = a * m[2] + b * m[5] + c * m[8];
    out0[i] = r0;
    out1[i] = r1;
    out2[i] = r2;
  }
}

// 2^t for t in [-126, 126]: round-to-nearest range reduction and a degree-6
// minimax polynomial on [-0.5, 0.5] (Cephes exp2f coefficients).
inline __m256 exp2_ps(__m256 t) {
  t = _mm256_min_ps(_mm256_max_ps(t, _mm256_set1_ps(-126.0f)), _mm256_set1_ps(126.0f));
  const __m256 n = _mm256_round_ps(t, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256 f = _mm256_sub_ps(t, n);
  __m256 p = _mm256_set1_ps(1.535336188319500e-4f);
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(1.339887440266574e-3f));
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(9.618437357674640e-3f));
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(5.550332471162809e-2f));
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(2.402264791363012e-1f));
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(6.931472028550421e-1f));
  p = _mm256_fmadd_ps(p, f, _mm256_set1_ps(1.0f));
  const __m256i e = _mm256_slli_epi32(_mm256_add_epi32(_mm256_cvtps_epi32(n), _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(p, _mm256_castsi256_ps(e));
}

inline __m256i od_to_level_ps(__m256 od) {
  const __m256 neg_log2_10 = _mm256_set1_ps(-3.3219280948873623f);
  __m256 v = _mm256_mul_ps(_mm256_set1_ps(255.0f), exp2_ps(_mm256_mul_ps(od, neg_log2_10)));
  v = _mm256_sub_ps(v, _mm256_set1_ps(1.0f));
  v = _mm256_min_ps(_mm256_max_ps(v, _mm256_setzero_ps()), _mm256_set1_ps(255.0f));
  return _mm256_cvtps_epi32(v);  // round to nearest even
}

inline uint8_t od_to_level_scalar(float od) {
  const double v = 255.0 * std::pow(10.0, -static_cast<double>(od)) - 1.0;
  return static_cast<uint8_t>(std::nearbyint(std::clamp(v, 0.0, 255.0)));
}

void od_to_rgb_avx2(const float* od_r, const float* od_g, const float* od_b, size_t n,
                    uint8_t* rgb) {
  alignas(32) int32_t r[8], g[8], b[8];
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_store_si256(reinterpret_cast<__m256i*>(r), od_to_level_ps(_mm256_loadu_ps(od_r + i)));
    _mm256_store_si256(reinterpret_cast<__m256i*>(g), od_to_level_ps(_mm256_loadu_ps(od_g + i)));
    _mm256_store_si256(reinterpret_cast<__m256i*>(b), od_to_level_ps(_mm256_loadu_ps(od_b + i)));
    uint8_t* dst = rgb + 3 * i;
    for (int l = 0; l < 8; ++l) {
      dst[3 * l + 0] = static_cast<uint8_t>(r[l]);
      dst[3 * l + 1] = static_cast<uint8_t>(g[l]);
      dst[3 * l + 2] = static_cast<uint8_t>(b[l]);
    }
  }
  for (; i < n; ++i) {
    rgb[3 * i + 0] = od_to_level_scalar(od_r[i]);
    rgb[3 * i + 1] = od_to_level_scalar(od_g[i]);
    rgb[3 * i + 2] = od_to_level_scalar(od_b[i]);
  }
}

void threshold_any3_avx2(const float* c0, const float* c1, const float* c2, size_t n,
                         const float* t, uint8_t* mask) {
  const __m256 t0 = _mm256_set1_ps(t[0]);
  const __m256 t1 = _mm256_set1_ps(t[1]);
  const __m256 t2 = _mm256_set1_ps(t[2]);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_cmp_ps(_mm256_loadu_ps(c0 + i), t0, _CMP_GE_OQ);
    const __m256 b = _mm256_cmp_ps(_mm256_loadu_ps(c1 + i), t1, _CMP_GE_OQ);
    const __m256 c = _mm256_cmp_ps(_mm256_loadu_ps(c2 + i), t2, _CMP_GE_OQ);
    const int bits = _mm256_movemask_ps(_mm256_or_ps(_mm256_or_ps(a, b), c));
    for (int l = 0; l < 8; ++l) mask[i + l] = static_cast<uint8_t>((bits >> l) & 1);
  }
  for (; i < n; ++i) {
    mask[i] = (c0[i] >= t[0] || c1[i] >= t[1] || c2[i] >= t[2]) ? 1 : 0;
  }
}

inline float convolve_row_at(const float* row, int width, int x, const float* taps, int radius) {
  float acc = 0.0f;
  for (int k = -radius; k <= radius; ++k) {
    acc = acc + taps[k + radius] * row[std::clamp(x + k, 0, width - 1)];
  }
  return acc;
}

void convolve_rows_avx2(const float* src, float* dst, int width, int height, const float* taps,
                        int radius) {
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<size_t>(y) * width;
    float* out = dst + static_cast<size_t>(y) * width;
    int x = 0;
    for (; x < std::min(radius, width); ++x) out[x] = convolve_row_at(row, width, x, taps, radius);
    // Interior: every tap is in bounds for all 8 lanes.
    for (; x + 8 + radius <= width; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = -radius; k <= radius; ++k) {
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k + radius]),
                                               _mm256_loadu_ps(row + x + k)));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) out[x] = convolve_row_at(row, width, x, taps, radius);
  }
}

void convolve_cols_avx2(const float* src, float* dst, int width, int height, const float* taps,
                        int radius) {
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<size_t>(y) * width;
    int x = 0;
    for (; x + 8 <= width; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = -radius; k <= radius; ++k) {
        const int sy = std::clamp(y + k, 0, height - 1);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k + radius]),
                                               _mm256_loadu_ps(src + static_cast<size_t>(sy) * width + x)));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        const int sy = std::clamp(y + k, 0, height - 1);
        acc = acc + taps[k + radius] * src[static_cast<size_t>(sy) * width + x];
      }
      out[x] = acc;
    }
  }
}

void pairwise_distance_avx2(const double* ax, const double* ay, size_t n, const double* bx,
                            const double* by, size_t m, double* out) {
  for (size_t i = 0; i < n; ++i) {
    const __m256d px = _mm256_set1_pd(ax[i]);
    const __m256d py = _mm256_set1_pd(ay[i]);
    double* row = out + i * m;
    size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      const __m256d dx = _mm256_sub_pd(px, _mm256_loadu_pd(bx + j));
      const __m256d dy = _mm256_sub_pd(py, _mm256_loadu_pd(by + j));
      const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
      _mm256_storeu_pd(row + j, _mm256_sqrt_pd(d2));
    }
    for (; j < m; ++j) {
      const double dx = ax[i] - bx[j];
      const double dy = ay[i] - by[j];
      row[j] = std::sqrt(dx * dx + dy * dy);
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{
      Isa::kAvx2,         rgb_to_od_avx2,      mix3_avx2,
      od_to_rgb_avx2,     threshold_any3_avx2, convolve_rows_avx2,
      convolve_cols_avx2, pairwise_distance_avx2,
  };
  return &table;
}

}  // namespace wsinuc::kernels
