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

#include "wsinuc/tiler.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

#include "wsinuc/errors.hpp"

namespace wsinuc {

Rect trimmed_rect(const Rect& region, const CropRule& rule) {
  Rect r = region;
  if (region.x0 > rule.outer.x0) r.x0 += rule.margins.left;
  if (region.y0 > rule.outer.y0) r.y0 += rule.margins.top;
  if (region.x1 < rule.outer.x1) r.x1 -= rule.margins.right;
  if (region.y1 < rule.outer.y1) r.y1 -= rule.margins.bottom;
  return r;
}

std::vector<Detection> central_crop_filter(std::span<const Detection> dets, const Rect& region,
                                           const CropRule& rule) {
  const Rect keep = trimmed_rect(region, rule);
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (keep.contains(d.cx, d.cy)) out.push_back(d);
  }
  return out;
}

std::vector<AxisCell> axis_layout(int64_t dim, int64_t size, int64_t overlap) {
  if (dim <= 0) throw UsageError("grid dimension must be positive");
  if (size <= 0) throw UsageError("grid cell size must be positive");
  if (overlap < 0 || overlap >= size) {
    throw UsageError(fmt::format("overlap {} must satisfy 0 <= overlap < size {}", overlap, size));
  }
  if (overlap % 2 != 0) throw UsageError(fmt::format("overlap {} must be even", overlap));

  std::vector<AxisCell> cells;
  if (size >= dim) {
    cells.push_back({0, dim, 0, 0});
    return cells;
  }
  const int64_t stride = size - overlap;
  for (int64_t o = 0;; o += stride) {
    if (o + size >= dim) {
      const int64_t last = dim - size;
      if (cells.empty() || cells.back().origin != last) cells.push_back({last, size, 0, 0});
      break;
    }
    cells.push_back({o, size, 0, 0});
  }
  for (size_t i = 0; i + 1 < cells.size(); ++i) {
    const double shared = static_cast<double>(cells[i].origin + cells[i].extent - cells[i + 1].origin);
    cells[i].trim_hi = shared / 2;
    cells[i + 1].trim_lo = shared / 2;
  }
  return cells;
}

namespace {

// Summed-area table over the mask bits, (w + 1) x (h + 1).
std::vector<int64_t> integral(const TissueMask& m) {
  std::vector<int64_t> s(static_cast<size_t>(m.width + 1) * (m.height + 1), 0);
  const size_t stride = m.width + 1;
  for (int y = 0; y < m.height; ++y) {
    int64_t row = 0;
    for (int x = 0; x < m.width; ++x) {
      row += m.at(x, y) ? 1 : 0;
      s[(y + 1) * stride + x + 1] = s[y * stride + x + 1] + row;
    }
  }
  return s;
}

double tissue_fraction(const TissueMask& m, const std::vector<int64_t>& sat, const Rect& r) {
  auto clampi = [](double v, int hi) { return std::clamp(static_cast<int>(v), 0, hi); };
  const int x0 = clampi(std::floor(r.x0 / m.scale), m.width);
  const int x1 = clampi(std::ceil(r.x1 / m.scale), m.width);
  const int y0 = clampi(std::floor(r.y0 / m.scale_y), m.height);
  const int y1 = clampi(std::ceil(r.y1 / m.scale_y), m.height);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const size_t stride = m.width + 1;
  const int64_t n = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0] + sat[y0 * stride + x0];
  return static_cast<double>(n) / (static_cast<double>(x1 - x0) * (y1 - y0));
}

}  // namespace

TileGrid enumerate_tiles(const TissueMask* mask, Size2 slide, int64_t tile_size, int64_t overlap,
                         double min_tissue_fraction) {
  if (!(min_tissue_fraction >= 0 && min_tissue_fraction <= 1)) {
    throw UsageError("min_tissue_fraction must be in [0, 1]");
  }
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.overlap = overlap;
  grid.min_tissue_fraction = min_tissue_fraction;
  grid.slide = slide;
  const auto xs = axis_layout(slide.width, tile_size, overlap);
  const auto ys = axis_layout(slide.height, tile_size, overlap);
  grid.candidate_count = xs.size() * ys.size();

  std::vector<int64_t> sat;
  if (mask) {
    if (mask->width <= 0 || mask->height <= 0) throw UsageError("tissue mask is empty");
    sat = integral(*mask);
  }
  for (size_t gy = 0; gy < ys.size(); ++gy) {
    for (size_t gx = 0; gx < xs.size(); ++gx) {
      TileSpec t;
      t.grid_x = static_cast<int64_t>(gx);
      t.grid_y = static_cast<int64_t>(gy);
      t.rect = Rect::from_origin_size(xs[gx].origin, ys[gy].origin, xs[gx].extent, ys[gy].extent);
      t.margins = {xs[gx].trim_lo, ys[gy].trim_lo, xs[gx].trim_hi, ys[gy].trim_hi};
      t.tissue_fraction = mask ? tissue_fraction(*mask, sat, t.rect) : 1.0;
      if (mask && t.tissue_fraction < min_tissue_fraction) continue;
      grid.tiles.push_back(t);
    }
  }
  return grid;
}

WindowGrid partition_windows(int tile_w, int tile_h, int window_size, int overlap) {
  WindowGrid grid;
  grid.window_size = window_size;
  grid.overlap = overlap;
  grid.tile_rect = {0, 0, static_cast<double>(tile_w), static_cast<double>(tile_h)};
  const auto xs = axis_layout(tile_w, window_size, overlap);
  const auto ys = axis_layout(tile_h, window_size, overlap);
  int index = 0;
  for (const auto& y : ys) {
    for (const auto& x : xs) {
      WindowSpec w;
      w.index = index++;
      w.rect = Rect::from_origin_size(x.origin, y.origin, x.extent, y.extent);
      w.margins = {x.trim_lo, y.trim_lo, x.trim_hi, y.trim_hi};
      grid.windows.push_back(w);
    }
  }
  return grid;
}

std::vector<Detection> merge_windows(std::span<const WindowDetections> per_window,
                                     const Rect& tile_rect) {
  std::vector<Detection> out;
  for (const auto& wd : per_window) {
    const Rect keep = trimmed_rect(wd.window.rect, {wd.window.margins, tile_rect});
    for (Detection d : wd.dets) {
      d.cx += wd.window.rect.x0;
      d.cy += wd.window.rect.y0;
      if (keep.contains(d.cx, d.cy)) out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

std::vector<Detection> merge_tiles(std::span<const TileDetections> per_tile, const Rect& slide_rect) {
  std::vector<Detection> out;
  for (const auto& td : per_tile) {
    const Rect keep = td.tile.keep_rect(slide_rect);
    for (Detection d : td.dets) {
      d.cx += td.tile.rect.x0;
      d.cy += td.tile.rect.y0;
      if (keep.contains(d.cx, d.cy)) out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

double oversized_fraction(const AnnotationSet& annotations, double overlap) {
  if (annotations.records.empty()) return 0.0;
  size_t n = 0;
  for (const auto& a : annotations.records) {
    if (std::max(a.w, a.h) > overlap) ++n;
  }
  return static_cast<double>(n) / annotations.records.size();
}

std::string tile_grid_to_json(const TileGrid& grid) {
  nlohmann::ordered_json j;
  j["tile_size"] = grid.tile_size;
  j["overlap"] = grid.overlap;
  j["min_tissue_fraction"] = grid.min_tissue_fraction;
  j["slide"] = {{"width", grid.slide.width}, {"height", grid.slide.height}};
  j["candidate_count"] = grid.candidate_count;
  auto tiles = nlohmann::ordered_json::array();
  const Rect outer = grid.slide_rect();
  for (const auto& t : grid.tiles) {
    const Rect k = t.keep_rect(outer);
    tiles.push_back({{"grid_x", t.grid_x},
                     {"grid_y", t.grid_y},
                     {"x", t.rect.x0},
                     {"y", t.rect.y0},
                     {"w", t.rect.width()},
                     {"h", t.rect.height()},
                     {"margins", {t.margins.left, t.margins.top, t.margins.right, t.margins.bottom}},
                     {"keep", {k.x0, k.y0, k.x1, k.y1}},
                     {"tissue_fraction", t.tissue_fraction}});
  }
  j["tiles"] = std::move(tiles);
  return j.dump(2) + "\n";
}

TileGrid tile_grid_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TileGrid g;
    g.tile_size = j.at("tile_size").get<int64_t>();
    g.overlap = j.at("overlap").get<int64_t>();
    g.min_tissue_fraction = j.at("min_tissue_fraction").get<double>();
    g.slide = {j.at("slide").at("width").get<int64_t>(), j.at("slide").at("height").get<int64_t>()};
    g.candidate_count = j.value("candidate_count", size_t{0});
    for (const auto& t : j.at("tiles")) {
      TileSpec s;
      s.grid_x = t.at("grid_x").get<int64_t>();
      s.grid_y = t.at("grid_y").get<int64_t>();
      s.rect = Rect::from_origin_size(t.at("x").get<double>(), t.at("y").get<double>(),
                                      t.at("w").get<double>(), t.at("h").get<double>());
      const auto& m = t.at("margins");
      s.margins = {m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>(), m.at(3).get<double>()};
      s.tissue_fraction = t.at("tissue_fraction").get<double>();
      g.tiles.push_back(s);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("malformed tiles.json: {}", e.what()));
  }
}

}  // namespace wsinuc
