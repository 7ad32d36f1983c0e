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
#include <string>
#include <vector>

#include "wsinuc/annotations.hpp"
#include "wsinuc/raster.hpp"

namespace wsinuc {

// Desk-scale stand-in for a scanned slide: hematoxylin-coloured elliptical
// nuclei on an eosin background, with exact ground truth.
struct SyntheticSlideSpec {
  int width = 2048;
  int height = 2048;
  double mpp = 0.25;
  int nucleus_count = 200;
  double diameter_min = 8;
  double diameter_max = 20;
  std::vector<double> class_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  uint64_t rng_seed = 0;
  // Placement attempts per nucleus before giving up as too dense.
  int max_attempts = 1000;
  // Minimum free space between the bounding circles of two nuclei.
  double min_gap = 2;
  // White border (pixels) free of tissue and nuclei.
  int tissue_inset = 0;
  // No eosin background at all: the slide is white apart from nuclei.
  bool blank = false;
  // Optional tissue tags, assigned by equal-width vertical bands.
  std::vector<std::string> tissue_names;

  void validate() const;
};

struct SyntheticSlide {
  RasterImage image;
  AnnotationSet annotations;
};

// Deterministic in rng_seed. Centroids and box sizes are multiples of 1/8 px
// so they survive decimal serialization exactly. Throws UsageError when the
// nuclei cannot be placed within max_attempts each.
SyntheticSlide generate_synthetic_slide(const SyntheticSlideSpec& spec);

// Writes the image (PNG, or pyramidal TIFF for .tif/.tiff) with the mpp in
// its metadata, and the annotations as JSONL.
void write_synthetic_slide(const SyntheticSlide& slide, double mpp,
                           const std::filesystem::path& slide_path,
                           const std::filesystem::path& annotation_path);

}  // namespace wsinuc
