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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsinuc/annotations.hpp"
#include "wsinuc/geometry.hpp"
#include "wsinuc/stainlab.hpp"

namespace wsinuc {

// Distance trimmed from each side of a region before deciding ownership.
struct Margins {
  double left = 0;
  double top = 0;
  double right = 0;
  double bottom = 0;
  friend bool operator==(const Margins&, const Margins&) = default;
};

// Central-crop rule: a side of a region is trimmed by its margin only when
// that side lies strictly inside `outer` (i.e. another region overlaps it).
struct CropRule {
  Margins margins;
  Rect outer;

  static CropRule uniform(double margin, const Rect& outer) {
    return {{margin, margin, margin, margin}, outer};
  }
};

// The half-open keep rectangle of `region` under `rule`.
Rect trimmed_rect(const Rect& region, const CropRule& rule);

// Keeps detections whose centroid lies in trimmed_rect(region, rule). Order is preserved.
std::vector<Detection> central_crop_filter(std::span<const Detection> dets, const Rect& region,
                                           const CropRule& rule);

// One position along an axis of a grid.
struct AxisCell {
  int64_t origin = 0;
  int64_t extent = 0;
  // Trim at the low / high side: half the overlap with the neighbouring
  // cell, 0 at the ends of the axis.
  double trim_lo = 0;
  double trim_hi = 0;
};

// Origins at k * (size - overlap); an origin that would overrun `dim` is
// replaced by dim - size (deduplicated). When size >= dim there is a single
// cell of extent dim. Neighbouring cells are trimmed at the midpoint of
// their actual overlap, which is overlap / 2 everywhere except next to a
// clamped last cell, so the keep intervals always partition [0, dim).
std::vector<AxisCell> axis_layout(int64_t dim, int64_t size, int64_t overlap);

struct TileSpec {
  int64_t grid_x = 0;
  int64_t grid_y = 0;
  Rect rect;  // level-0 (working-resolution) coordinates
  Margins margins;
  double tissue_fraction = 1.0;

  Rect keep_rect(const Rect& slide_rect) const { return trimmed_rect(rect, {margins, slide_rect}); }
};

struct TileGrid {
  int64_t tile_size = 1024;
  int64_t overlap = 64;
  double min_tissue_fraction = 0.05;
  Size2 slide;
  // Sorted by (y, x).
  std::vector<TileSpec> tiles;
  // Tiles before tissue filtering.
  size_t candidate_count = 0;

  Rect slide_rect() const {
    return {0, 0, static_cast<double>(slide.width), static_cast<double>(slide.height)};
  }
};

// `mask` may be null, meaning the whole slide is tissue. Tiles whose
// tissue fraction (mask pixels under the footprint) is below
// min_tissue_fraction are dropped.
TileGrid enumerate_tiles(const TissueMask* mask, Size2 slide, int64_t tile_size, int64_t overlap,
                         double min_tissue_fraction);

struct WindowSpec {
  int index = 0;
  Rect rect;  // tile-local
  Margins margins;
};

struct WindowGrid {
  int window_size = 256;
  int overlap = 64;
  Rect tile_rect;  // tile-local, origin (0, 0)
  std::vector<WindowSpec> windows;
};

WindowGrid partition_windows(int tile_w, int tile_h, int window_size, int overlap);
inline WindowGrid partition_windows(int tile_size, int window_size, int overlap) {
  return partition_windows(tile_size, tile_size, window_size, overlap);
}

struct WindowDetections {
  WindowSpec window;
  std::vector<Detection> dets;  // window-local
};

struct TileDetections {
  TileSpec tile;
  std::vector<Detection> dets;  // tile-local
};

// Translates each window's detections into tile coordinates, applies the
// central-crop rule against the tile rectangle, and returns the union in
// canonical order.
std::vector<Detection> merge_windows(std::span<const WindowDetections> per_window,
                                     const Rect& tile_rect);
// Same rule one level up: tile-local detections into slide coordinates.
std::vector<Detection> merge_tiles(std::span<const TileDetections> per_tile, const Rect& slide_rect);

// Fraction of nuclei whose larger box side exceeds the overlap (0 for an empty set).
double oversized_fraction(const AnnotationSet& annotations, double overlap);

// tiles.json
std::string tile_grid_to_json(const TileGrid& grid);
TileGrid tile_grid_from_json(const std::string& text);

}  // namespace wsinuc
