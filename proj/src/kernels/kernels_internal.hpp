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
#include <cmath>
#include <cstdint>

#include "wsinuc/kernels/kernels.hpp"

namespace wsinuc::kernels {

// -log10((v + 1) / 255), evaluated in double and rounded once to float.
inline float optical_density(uint8_t v) {
  return static_cast<float>(-std::log10((static_cast<double>(v) + 1.0) / 255.0));
}

inline const std::array<float, 256>& optical_density_lut() {
  static const std::array<float, 256> lut = [] {
    std::array<float, 256> t{};
    for (int v = 0; v < 256; ++v) t[v] = optical_density(static_cast<uint8_t>(v));
    return t;
  }();
  return lut;
}

}  // namespace wsinuc::kernels
