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

#include <algorithm>
#include <cstdint>
#include <tuple>

namespace wsinuc {

// Axis-aligned rectangle, half-open on the max side: [x0, x1) x [y0, y1).
struct Rect {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;

  static Rect from_origin_size(double x, double y, double w, double h) {
    return {x, y, x + w, y + h};
  }

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool empty() const { return !(x1 > x0 && y1 > y0); }

  bool contains(double x, double y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }

  Rect translated(double dx, double dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }

  Rect intersect(const Rect& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// One predicted (or annotated) nucleus.
struct Detection {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
  int class_id = 0;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Canonical ordering used for every merged output: (cy, cx, class_id, score),
// with w and h as final tie-breakers so the order is total.
inline bool detection_less(const Detection& a, const Detection& b) {
  return std::tie(a.cy, a.cx, a.class_id, a.score, a.w, a.h) <
         std::tie(b.cy, b.cx, b.class_id, b.score, b.w, b.h);
}

struct Size2 {
  int64_t width = 0;
  int64_t height = 0;
  friend bool operator==(const Size2&, const Size2&) = default;
};

}  // namespace wsinuc
