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

// Data-parallel inner loops used by the stain, mask, blur and matching code.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2 variant. The variant is picked once at startup from CPUID and can
// be forced with WSINUC_ISA=scalar|avx2 or kernels::select(). Both variants
// are compiled with -ffp-contract=off and evaluate the same operation order,
// so every kernel except od_to_rgb is bit-identical across ISAs; od_to_rgb
// uses a polynomial exp and may differ by one level after rounding.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace wsinuc::kernels {

enum class Isa {
  kScalar,
  kAvx2,
};

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // Interleaved 8-bit RGB -> planar optical density, od = -log10((v + 1) / 255).
  void (*rgb_to_od)(const uint8_t* rgb, size_t n, float* od_r, float* od_g, float* od_b);

  // Planar row-vector times 3x3 matrix: out_j[i] = sum_k in_k[i] * m[3 * k + j].
  void (*mix3)(const float* in0, const float* in1, const float* in2, size_t n,
               const float* m, float* out0, float* out1, float* out2);

  // Planar optical density -> interleaved RGB, v = clip(255 * 10^-od - 1, 0, 255),
  // rounded to nearest.
  void (*od_to_rgb)(const float* od_r, const float* od_g, const float* od_b, size_t n,
                    uint8_t* rgb);

  // mask[i] = 1 if any c_k[i] >= t[k], else 0.
  void (*threshold_any3)(const float* c0, const float* c1, const float* c2, size_t n,
                         const float* t, uint8_t* mask);

  // 1-D convolution with `2 * radius + 1` taps along rows (or columns) of a
  // width x height float plane. Samples beyond the border replicate the edge.
  void (*convolve_rows)(const float* src, float* dst, int width, int height,
                        const float* taps, int radius);
  void (*convolve_cols)(const float* src, float* dst, int width, int height,
                        const float* taps, int radius);

  // out[i * m + j] = |a_i - b_j| (Euclidean).
  void (*pairwise_distance)(const double* ax, const double* ay, size_t n, const double* bx,
                            const double* by, size_t m, double* out);
};

const KernelTable& scalar_table();
// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
Isa best_supported_isa();

// The table used by the library. Thread-safe to read.
const KernelTable& active();
// Forces a variant; throws UsageError if it is not supported on this CPU/build.
void select(Isa isa);
// Parses "scalar" / "avx2" / "auto".
Isa parse_isa(std::string_view name);

}  // namespace wsinuc::kernels
