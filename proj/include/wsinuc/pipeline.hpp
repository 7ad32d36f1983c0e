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
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wsinuc/detector.hpp"
#include "wsinuc/slide_io.hpp"
#include "wsinuc/stainlab.hpp"
#include "wsinuc/tiler.hpp"

namespace wsinuc {

struct PipelineConfig {
  int tile_size = 1024;
  int tile_overlap = 64;
  int window_size = 256;
  int window_overlap = 64;
  // Working resolution; regions are resampled to it when the slide differs.
  // 0 keeps the slide's own resolution.
  double mpp_target = 0.25;
  double min_tissue_fraction = 0.05;
  int worker_count = 1;
  int thumbnail_max_dim = 2048;
  TissueThresholds tissue;
  DetectorConfig detector;

  // Checks the invariants and copies window_size / mpp into `detector`.
  void validate();
};

struct TimingReport {
  double preprocess_s = 0;
  // Wall time of the tile stage.
  double inference_s = 0;
  double postprocess_s = 0;
  double total_s = 0;
  // Sum of per-tile processing times over all workers.
  double tile_time_sum_s = 0;
  double tissue_area_mm2 = 0;
  double throughput_mm2_per_s = 0;
};

struct RunCounts {
  size_t candidate_tiles = 0;
  size_t tiles = 0;
  size_t windows = 0;
  size_t detections = 0;
};

struct RunManifest {
  std::string config_json;  // resolved configuration
  std::string slide_name;
  int64_t slide_width = 0;
  int64_t slide_height = 0;
  double slide_mpp = 0;
  std::string slide_sha256;
  std::string version;
  std::string isa;
  std::string backend;
  RunCounts counts;
  TimingReport timings;

  std::string to_json() const;
};

struct RunResult {
  std::vector<Detection> detections;  // level-0, canonical order
  TimingReport timings;
  RunManifest manifest;
};

using BackendFactory = std::function<std::unique_ptr<DetectorBackend>()>;

struct RunOptions {
  // Written (JSONL) with the detections of completed tiles when the backend fails.
  std::optional<std::filesystem::path> partial_path;
  // Embedded in the manifest.
  std::string config_json = "{}";
};

// Pre-processing (thumbnail, tissue mask, tile grid), tile inference on
// cfg.worker_count workers, merge. The result is independent of the worker
// count and completion order for deterministic backends. A backend failure
// stops the run and is rethrown as BackendError after the partial file is
// written.
RunResult run_slide(PipelineConfig cfg, const SlideSource& slide, const BackendFactory& make_backend,
                    const RunOptions& options = {});

// Result of the tile stage for one tile, in tile-local working pixels.
struct TileRecord {
  size_t tile_index = 0;
  std::vector<Detection> detections;
  double seconds = 0;
};

// Post-processing: merges tile records (any order) with the grid's
// central-crop rule and maps working pixels to level 0 by `downsample`.
std::vector<Detection> merge_tile_records(const TileGrid& grid, std::vector<TileRecord> records, double downsample);

// Pre-processing alone: the tissue mask and the resulting grid in working pixels.
struct Preprocessed {
  TissueMask mask;  // scale in level-0 pixels per mask pixel
  TileGrid grid;
  double downsample = 1.0;  // level-0 pixels per working pixel
  double tissue_area_mm2 = 0;
};
Preprocessed preprocess_slide(const PipelineConfig& cfg, const SlideSource& slide);

struct BenchInput {
  const SlideSource* slide = nullptr;
  BackendFactory make_backend;
};

struct BenchRow {
  std::string slide;
  TimingReport timings;
  size_t detections = 0;
};

struct LineFit {
  double slope = 0;
  double intercept = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  // total_s, inference_s and postprocess_s against tissue area.
  LineFit total_fit;
  LineFit inference_fit;
  LineFit postprocess_fit;

  std::string to_csv() const;
  std::string fit_json() const;
};

// Least squares y = slope * x + intercept; through the origin when all x
// are equal. Throws UsageError on empty input.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Throws UsageError on an empty slide list.
BenchReport run_bench(const PipelineConfig& cfg, const std::vector<BenchInput>& inputs);

}  // namespace wsinuc
