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

#include "wsinuc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "wsinuc/detections_io.hpp"
#include "wsinuc/errors.hpp"
#include "wsinuc/kernels/kernels.hpp"

namespace wsinuc {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double working_downsample(const PipelineConfig& cfg, double slide_mpp) {
  if (!(cfg.mpp_target > 0)) return 1.0;
  const double f = cfg.mpp_target / slide_mpp;
  return std::abs(f - 1.0) < 1e-9 ? 1.0 : f;
}

struct TileWork {
  WindowGrid windows;
  int64_t first_window_id = 0;
};

// Serializes calls into a backend shared by several workers.
struct BackendSlot {
  std::unique_ptr<DetectorBackend> backend;
  std::mutex mu;
};

}  // namespace

void PipelineConfig::validate() {
  if (tile_size <= 0 || window_size <= 0) throw UsageError("tile_size and window_size must be > 0");
  if (window_size > tile_size) throw UsageError("window_size must be <= tile_size");
  if (tile_overlap != window_overlap) {
    throw UsageError(fmt::format("tile_overlap ({}) must equal window_overlap ({})", tile_overlap, window_overlap));
  }
  if (tile_overlap < 0 || tile_overlap % 2 != 0 || window_overlap >= window_size) {
    throw UsageError("overlap must be even, >= 0 and smaller than window_size");
  }
  if (mpp_target < 0) throw UsageError("mpp_target must be >= 0");
  if (!(min_tissue_fraction >= 0 && min_tissue_fraction <= 1)) throw UsageError("min_tissue_fraction must be in [0, 1]");
  if (worker_count < 1) throw UsageError("worker_count must be >= 1");
  if (thumbnail_max_dim < 16) throw UsageError("thumbnail_max_dim must be >= 16");
  detector.window_size = window_size;
  if (mpp_target > 0) detector.mpp = mpp_target;
  detector.validate();
}

Preprocessed preprocess_slide(const PipelineConfig& cfg, const SlideSource& slide) {
  Preprocessed p;
  p.downsample = working_downsample(cfg, slide.mpp());
  const Thumbnail thumb = thumbnail(slide, cfg.thumbnail_max_dim);
  p.mask = compute_tissue_mask(thumb.image, thumb.scale, thumb.scale_y, StainMatrix::ruifrok_johnson(), cfg.tissue);
  const double f = p.downsample;
  TissueMask working = p.mask;
  working.scale /= f;
  working.scale_y /= f;
  const Size2 dims{static_cast<int64_t>(std::ceil(slide.width() / f - 1e-9)),
                   static_cast<int64_t>(std::ceil(slide.height() / f - 1e-9))};
  p.grid = enumerate_tiles(&working, dims, cfg.tile_size, cfg.tile_overlap, cfg.min_tissue_fraction);
  const double mask_area = static_cast<double>(p.mask.count()) * p.mask.scale * p.mask.scale_y * slide.mpp() *
                           slide.mpp() / 1e6;
  p.tissue_area_mm2 = std::min(mask_area, slide.area_mm2());
  return p;
}

std::vector<Detection> merge_tile_records(const TileGrid& grid, std::vector<TileRecord> records, double downsample) {
  std::sort(records.begin(), records.end(),
            [](const TileRecord& a, const TileRecord& b) { return a.tile_index < b.tile_index; });
  std::vector<TileDetections> per_tile;
  per_tile.reserve(records.size());
  for (auto& r : records) per_tile.push_back({grid.tiles.at(r.tile_index), std::move(r.detections)});
  auto dets = merge_tiles(per_tile, grid.slide_rect());
  if (downsample != 1.0) {
    for (auto& d : dets) {
      d.cx *= downsample;
      d.cy *= downsample;
      d.w *= downsample;
      d.h *= downsample;
    }
    std::sort(dets.begin(), dets.end(), detection_less);
  }
  return dets;
}

RunResult run_slide(PipelineConfig cfg, const SlideSource& slide, const BackendFactory& make_backend,
                    const RunOptions& options) {
  cfg.validate();
  const auto t0 = Clock::now();

  // Pre-processing.
  const Preprocessed pre = preprocess_slide(cfg, slide);
  const TileGrid& grid = pre.grid;
  const double f = pre.downsample;
  std::vector<TileWork> work(grid.tiles.size());
  std::vector<WindowRect> rects;
  int64_t next_id = 0;
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    const auto& t = grid.tiles[i];
    work[i].windows = partition_windows(static_cast<int>(t.rect.width()), static_cast<int>(t.rect.height()),
                                        cfg.window_size, cfg.window_overlap);
    work[i].first_window_id = next_id;
    for (const auto& w : work[i].windows.windows) {
      const double x0 = (t.rect.x0 + w.rect.x0) * f, y0 = (t.rect.y0 + w.rect.y0) * f;
      rects.push_back({next_id++, {x0, y0, x0 + cfg.window_size * f, y0 + cfg.window_size * f}});
    }
  }

  const size_t worker_count = std::max<size_t>(1, std::min<size_t>(cfg.worker_count, grid.tiles.size()));
  std::vector<std::unique_ptr<BackendSlot>> slots;
  slots.push_back(std::make_unique<BackendSlot>());
  slots[0]->backend = make_backend();
  if (!slots[0]->backend) throw UsageError("backend factory returned nothing");
  const bool shared = slots[0]->backend->shareable();
  if (!shared) {
    for (size_t i = 1; i < worker_count; ++i) {
      slots.push_back(std::make_unique<BackendSlot>());
      slots.back()->backend = make_backend();
    }
  }
  const std::string backend_name = slots[0]->backend->name();
  auto end_sessions = [&] {
    for (auto& s : slots) {
      try {
        s->backend->end_session();
      } catch (const std::exception& e) {
        spdlog::warn("backend shutdown: {}", e.what());
      }
    }
  };
  try {
    if (!grid.tiles.empty()) {
      for (auto& s : slots) s->backend->begin_session(cfg.detector, rects);
    }
  } catch (const Error&) {
    end_sessions();
    throw;
  } catch (const std::exception& e) {
    end_sessions();
    throw BackendError(fmt::format("backend {} failed to start: {}", backend_name, e.what()));
  }
  const double preprocess_s = seconds_since(t0);

  // Inference.
  const auto t1 = Clock::now();
  std::vector<TileRecord> records;
  std::mutex records_mu;
  std::atomic<size_t> next_tile{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&](size_t worker_index) {
    BackendSlot& slot = *slots[shared ? 0 : worker_index];
    try {
      const SlideSource handle = slide.reopen();
      for (;;) {
        if (stop.load()) return;
        const size_t idx = next_tile.fetch_add(1);
        if (idx >= grid.tiles.size()) return;
        const auto tile_start = Clock::now();
        const TileSpec& tile = grid.tiles[idx];
        const int tw = static_cast<int>(tile.rect.width()), th = static_cast<int>(tile.rect.height());
        const RasterImage region =
            f == 1.0 ? handle.read_region(static_cast<int64_t>(tile.rect.x0), static_cast<int64_t>(tile.rect.y0), tw, th)
                     : handle.read_region_scaled({tile.rect.x0 * f, tile.rect.y0 * f, tile.rect.x1 * f, tile.rect.y1 * f},
                                                 tw, th);
        const auto& windows = work[idx].windows.windows;
        std::vector<WindowItem> items;
        items.reserve(windows.size());
        for (size_t k = 0; k < windows.size(); ++k) {
          const auto& w = windows[k];
          const int wx = static_cast<int>(w.rect.x0), wy = static_cast<int>(w.rect.y0);
          const double x0 = (tile.rect.x0 + w.rect.x0) * f, y0 = (tile.rect.y0 + w.rect.y0) * f;
          items.push_back({work[idx].first_window_id + static_cast<int64_t>(k),
                           region.crop(wx, wy, cfg.window_size, cfg.window_size),
                           {x0, y0, x0 + cfg.window_size * f, y0 + cfg.window_size * f},
                           f});
        }
        WindowResults results;
        {
          std::lock_guard lock(slot.mu);
          results = detect(*slot.backend, items, cfg.detector);
        }
        std::vector<WindowDetections> per_window;
        per_window.reserve(windows.size());
        for (size_t k = 0; k < windows.size(); ++k) {
          per_window.push_back({windows[k], filter_by_confidence(results[k], cfg.detector.confidence_threshold)});
        }
        TileRecord rec{idx, merge_windows(per_window, work[idx].windows.tile_rect), 0};
        rec.seconds = seconds_since(tile_start);
        std::lock_guard lock(records_mu);
        records.push_back(std::move(rec));
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      stop.store(true);
    }
  };

  if (!grid.tiles.empty()) {
    if (worker_count == 1) {
      worker(0);
    } else {
      std::vector<std::thread> threads;
      for (size_t i = 0; i < worker_count; ++i) threads.emplace_back(worker, i);
      for (auto& t : threads) t.join();
    }
  }
  const double inference_s = seconds_since(t1);

  if (failure) {
    end_sessions();
    if (options.partial_path) {
      const auto partial = merge_tile_records(grid, records, f);
      write_detections(*options.partial_path, partial, DetectionFormat::kJsonl, cfg.detector.class_names);
      spdlog::error("run aborted after {} of {} tiles; partial detections in {}", records.size(), grid.tiles.size(),
                    options.partial_path->string());
    }
    try {
      std::rethrow_exception(failure);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(e.what());
    }
  }

  // Post-processing.
  const auto t2 = Clock::now();
  double tile_time_sum = 0;
  for (const auto& r : records) tile_time_sum += r.seconds;
  RunResult result;
  result.detections = merge_tile_records(grid, std::move(records), f);
  const double postprocess_s = seconds_since(t2);
  const double total_s = seconds_since(t0);
  end_sessions();

  auto& t = result.timings;
  t.preprocess_s = preprocess_s;
  t.inference_s = inference_s;
  t.postprocess_s = postprocess_s;
  t.total_s = total_s;
  t.tile_time_sum_s = tile_time_sum;
  t.tissue_area_mm2 = pre.tissue_area_mm2;
  t.throughput_mm2_per_s = total_s > 0 ? pre.tissue_area_mm2 / total_s : 0.0;

  auto& m = result.manifest;
  m.config_json = options.config_json;
  m.slide_name = slide.name();
  m.slide_width = slide.width();
  m.slide_height = slide.height();
  m.slide_mpp = slide.mpp();
  m.slide_sha256 = slide.content_hash();
  m.version = WSINUC_VERSION;
  m.isa = std::string(kernels::isa_name(kernels::active().isa));
  m.backend = backend_name;
  m.counts = {grid.candidate_count, grid.tiles.size(), rects.size(), result.detections.size()};
  m.timings = t;
  return result;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  try {
    cfg = nlohmann::ordered_json::parse(config_json);
  } catch (const nlohmann::json::exception&) {
    cfg = config_json;
  }
  j["version"] = version;
  j["config"] = std::move(cfg);
  j["slide"] = {{"name", slide_name},
                {"width", slide_width},
                {"height", slide_height},
                {"mpp", slide_mpp},
                {"sha256", slide_sha256}};
  j["isa"] = isa;
  j["backend"] = backend;
  j["counts"] = {{"candidate_tiles", counts.candidate_tiles},
                 {"tiles", counts.tiles},
                 {"windows", counts.windows},
                 {"detections", counts.detections}};
  j["timings"] = {{"preprocess_s", timings.preprocess_s},
                  {"inference_s", timings.inference_s},
                  {"postprocess_s", timings.postprocess_s},
                  {"total_s", timings.total_s},
                  {"tile_time_sum_s", timings.tile_time_sum_s},
                  {"tissue_area_mm2", timings.tissue_area_mm2},
                  {"throughput_mm2_per_s", timings.throughput_mm2_per_s}};
  return j.dump(2) + "\n";
}

}  // namespace wsinuc
