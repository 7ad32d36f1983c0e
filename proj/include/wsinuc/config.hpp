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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsinuc/detector.hpp"
#include "wsinuc/metrics.hpp"
#include "wsinuc/pipeline.hpp"
#include "wsinuc/synthetic.hpp"

namespace wsinuc {

struct InputConfig {
  std::string slide;
  // Overrides the slide's own resolution when > 0.
  double mpp = 0;
  // eval / sweep-threshold inputs.
  std::string predictions;
  std::string ground_truth;
};

struct BackendConfig {
  // oracle | jitter | process
  std::string kind = "oracle";
  // Level-0 annotation JSONL for the oracle and jitter backends.
  std::string annotations;
  std::vector<std::string> adapter_command;
  std::string sidecar_dir;
  NoiseSpec noise;
};

struct OutputConfig {
  // synth
  std::string slide = "synthetic.tif";
  std::string annotations = "synthetic.jsonl";
  // mask / tiles / eval / sweep-threshold
  std::string mask = "mask.png";
  std::string tiles = "tiles.json";
  std::string report;
  std::string sweep;
  // detect
  std::string detections = "detections.jsonl";
  // jsonl | csv | geojson; empty means from the extension.
  std::string format;
  std::string manifest;
  // Empty means "<detections>.partial.jsonl".
  std::string partial;
};

struct EvalConfig {
  // Resolution of the prediction / annotation coordinates.
  double mpp = 0.25;
  double radius_um = 3.0;
  // optimal | greedy
  std::string matcher = "optimal";
  bool restricted_class_errors = false;
  double threshold = 0.0;
  std::vector<double> sweep_grid;  // default 0, 0.05, ..., 1
};

struct BenchConfig {
  std::vector<int> sizes = {2048, 4096};
  // Synthetic nuclei per level-0 megapixel.
  double nuclei_per_mpx = 200;
  // Slide files to time instead of synthetic ones, with one annotation
  // file each for the oracle / jitter backends.
  std::vector<std::string> slides;
  std::vector<std::string> annotations;
  std::string csv = "bench.csv";
  std::string fit = "bench_fit.json";
};

struct AppConfig {
  uint64_t seed = 0;
  std::string isa = "auto";
  std::string log_level = "warn";
  PipelineConfig pipeline;
  InputConfig input;
  BackendConfig backend;
  OutputConfig output;
  EvalConfig eval;
  SyntheticSlideSpec synth;
  BenchConfig bench;

  EvalOptions eval_options() const;
};

// "dotted.key" = TOML literal (e.g. "tiling.tile_size", "512").
using ConfigOverride = std::pair<std::string, std::string>;

// TOML literal for a string value.
std::string toml_string(const std::string& s);

// Reads the TOML file (if any), applies the overrides on top and resolves
// the result. Unknown keys and ill-typed values are UsageErrors; a
// missing or unparsable file is an IoError / UsageError respectively.
AppConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<ConfigOverride>& overrides);

// Builds the configured detector backend. Oracle and jitter read
// backend.annotations (level-0); process spawns backend.adapter_command.
BackendFactory make_backend_factory(const AppConfig& cfg);

// Resolved configuration as JSON (for manifests).
std::string config_to_json(const AppConfig& cfg);

}  // namespace wsinuc
