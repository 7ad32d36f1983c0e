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
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsinuc/annotations.hpp"
#include "wsinuc/geometry.hpp"
#include "wsinuc/raster.hpp"

namespace wsinuc {

std::vector<std::string> default_class_names();

struct DetectorConfig {
  int window_size = 256;
  double mpp = 0.25;
  int num_queries = 900;
  int top_k = 300;
  double confidence_threshold = 0.0;
  std::vector<std::string> class_names = default_class_names();
  // Windows per backend call.
  int max_batch = 16;

  void validate() const;
};

// One window handed to a backend. `source_rect` is the slide area the
// image covers, in level-0 pixels, and `downsample` the level-0 pixels per
// image pixel. Reference backends use them; image models only need pixels.
struct WindowItem {
  int64_t window_id = 0;
  RasterImage image;
  Rect source_rect;
  double downsample = 1.0;
};

struct WindowRect {
  int64_t window_id = 0;
  Rect rect;  // level-0
};

using WindowResults = std::vector<std::vector<Detection>>;

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::string name() const = 0;
  // True when one instance may serve several workers concurrently.
  virtual bool shareable() const { return false; }
  // Announces every window the session will submit, before the first infer.
  virtual void begin_session(const DetectorConfig& /*cfg*/, std::span<const WindowRect> /*windows*/) {}
  // One detection list per window, window-local coordinates.
  virtual WindowResults infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) = 0;
  virtual void end_session() {}
};

// Runs `backend` over the batch in chunks of cfg.max_batch and enforces the
// contract: uniform window_size dimensions, scores descending (stable),
// at most top_k per window, centroids inside the window. Backend failures
// are rethrown as BackendError naming the window ids.
WindowResults detect(DetectorBackend& backend, std::span<const WindowItem> batch, const DetectorConfig& cfg);

// Annotated nuclei with centroid in the half-open `window`, window-local, score 1.
std::vector<Detection> oracle_detect(std::span<const Annotation> annotations, const Rect& window);

struct NoiseSpec {
  double drop_prob = 0;
  double jitter_sigma = 0;  // pixels
  double class_flip_prob = 0;
  std::pair<double, double> score_range_true = {1.0, 1.0};
  std::pair<double, double> score_range_false = {0.0, 0.0};
  // Expected spurious detections per window (Poisson).
  double false_positive_rate = 0;
  uint64_t rng_seed = 0;

  void validate() const;
};

// Noise decisions for a nucleus depend only on (rng_seed, annotation index),
// so a nucleus seen by two overlapping windows is perturbed identically;
// window membership uses the jittered centroid. Spurious detections are
// seeded by the window origin.
std::vector<Detection> jitter_detect(std::span<const Annotation> annotations, const Rect& window,
                                     const NoiseSpec& noise, int num_classes);

// Keeps score >= tau, preserving order.
std::vector<Detection> filter_by_confidence(std::span<const Detection> dets, double tau);

// Oracle over a level-0 annotation set.
class OracleBackend : public DetectorBackend {
 public:
  explicit OracleBackend(std::vector<Annotation> annotations);
  std::string name() const override { return "oracle"; }
  bool shareable() const override { return true; }
  WindowResults infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) override;

 private:
  std::vector<Annotation> annotations_;  // sorted by cy
};

class JitterBackend : public DetectorBackend {
 public:
  JitterBackend(std::vector<Annotation> annotations, NoiseSpec noise);
  std::string name() const override { return "jitter"; }
  bool shareable() const override { return true; }
  WindowResults infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) override;

 private:
  std::vector<Annotation> annotations_;
  NoiseSpec noise_;
};

}  // namespace wsinuc
