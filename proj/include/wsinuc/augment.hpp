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

#include <random>
#include <span>
#include <vector>

#include "wsinuc/raster.hpp"
#include "wsinuc/stainlab.hpp"

namespace wsinuc {

// Box target in pixel coordinates of the image it belongs to.
struct AugBox {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
  int class_id = 0;
  friend bool operator==(const AugBox&, const AugBox&) = default;
};

// Training-time augmentation settings. Defaults are the values the detector
// was trained with; ops run in the order the fields are declared.
struct AugmentationParams {
  struct Elastic {
    double p = 0.2;
    double alpha = 0.5;
    double sigma = 0.25;
  } elastic;
  double hflip_p = 0.5;
  double vflip_p = 0.5;
  struct Rotate {
    double p = 1.0;
    std::vector<int> angles = {0, 90, 180, 270};
  } rotate;
  struct Blur {
    double p = 0.2;
    int kernel_size = 9;
    double sigma_min = 0.2;
    double sigma_max = 1.0;
  } blur;
  struct Hed {
    double p = 0.2;
    double alpha = 0.04;
    double beta = 0.04;
  } hed;
  struct ResizedCrop {
    double p = 0.2;
    int size = 256;
    double scale_min = 0.8;
    double scale_max = 1.0;
  } resized_crop;

  // Every probability set to zero.
  static AugmentationParams disabled();
  void validate() const;
};

struct Augmented {
  RasterImage image;
  std::vector<AugBox> boxes;
};

Augmented apply_augmentations(const RasterImage& img, std::span<const AugBox> boxes,
                              const AugmentationParams& params, std::mt19937_64& rng,
                              const StainMatrix& stains = StainMatrix::ruifrok_johnson());

// Individual geometric ops. Continuous coordinates: pixel i covers [i, i + 1).
Augmented hflip(const RasterImage& img, std::span<const AugBox> boxes);
Augmented vflip(const RasterImage& img, std::span<const AugBox> boxes);
// Counter-clockwise rotation by quarter_turns * 90 degrees.
Augmented rotate90(const RasterImage& img, std::span<const AugBox> boxes, int quarter_turns);
// Crops [x0, x0 + side_w) x [y0, y0 + side_h) and resizes it to size x size.
// Boxes are clipped to the crop; boxes entirely outside it are dropped.
Augmented resized_crop(const RasterImage& img, std::span<const AugBox> boxes, double x0, double y0,
                       double side_w, double side_h, int size);
// Random smooth displacement field of magnitude ~alpha, Gaussian-smoothed
// with sigma. Box centroids follow the field; box sizes are unchanged.
Augmented elastic(const RasterImage& img, std::span<const AugBox> boxes, double alpha, double sigma,
                  std::mt19937_64& rng);

// Separable Gaussian blur with an odd kernel size.
RasterImage gaussian_blur(const RasterImage& img, int kernel_size, double sigma);
std::vector<float> gaussian_taps(int kernel_size, double sigma);

}  // namespace wsinuc
