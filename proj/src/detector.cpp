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

#include "wsinuc/detector.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "wsinuc/errors.hpp"

namespace wsinuc {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double draw_in(std::mt19937_64& rng, std::pair<double, double> range) {
  if (range.first == range.second) return range.first;
  return std::uniform_real_distribution<double>(range.first, range.second)(rng);
}

void check_range(std::pair<double, double> r, const char* what) {
  if (!(r.first >= 0 && r.second <= 1 && r.first <= r.second)) {
    throw UsageError(fmt::format("{} must be an interval within [0, 1]", what));
  }
}

void to_window_pixels(std::vector<Detection>& dets, double downsample) {
  if (downsample == 1.0) return;
  for (auto& d : dets) {
    d.cx /= downsample;
    d.cy /= downsample;
    d.w /= downsample;
    d.h /= downsample;
  }
}

std::string id_list(std::span<const WindowItem> batch) {
  std::vector<int64_t> ids;
  for (const auto& w : batch) ids.push_back(w.window_id);
  return fmt::format("{}", fmt::join(ids, ","));
}

}  // namespace

std::vector<std::string> default_class_names() {
  return {"neoplastic", "epithelial", "inflammatory", "connective", "necrosis"};
}

void DetectorConfig::validate() const {
  if (window_size <= 0) throw UsageError("window_size must be > 0");
  if (!(mpp > 0)) throw UsageError("detector mpp must be > 0");
  if (num_queries <= 0) throw UsageError("num_queries must be > 0");
  if (top_k <= 0 || top_k > num_queries) throw UsageError("top_k must satisfy 0 < top_k <= num_queries");
  if (!(confidence_threshold >= 0 && confidence_threshold <= 1)) {
    throw UsageError("confidence_threshold must be in [0, 1]");
  }
  if (class_names.empty()) throw UsageError("class_names must not be empty");
  if (max_batch <= 0) throw UsageError("max_batch must be > 0");
}

WindowResults detect(DetectorBackend& backend, std::span<const WindowItem> batch, const DetectorConfig& cfg) {
  WindowResults out;
  out.reserve(batch.size());
  for (const auto& w : batch) {
    if (w.image.width() != cfg.window_size || w.image.height() != cfg.window_size) {
      throw UsageError(fmt::format("window {} is {}x{}, expected {}x{}", w.window_id, w.image.width(),
                                   w.image.height(), cfg.window_size, cfg.window_size));
    }
  }
  const int num_classes = static_cast<int>(cfg.class_names.size());
  for (size_t start = 0; start < batch.size(); start += cfg.max_batch) {
    const auto chunk = batch.subspan(start, std::min<size_t>(cfg.max_batch, batch.size() - start));
    WindowResults got;
    try {
      got = backend.infer(chunk, cfg);
    } catch (const BackendError& e) {
      throw BackendError(fmt::format("backend {} failed on windows [{}]: {}", backend.name(), id_list(chunk), e.what()));
    } catch (const std::exception& e) {
      throw BackendError(fmt::format("backend {} failed on windows [{}]: {}", backend.name(), id_list(chunk), e.what()));
    }
    if (got.size() != chunk.size()) {
      throw BackendError(fmt::format("backend {} returned {} lists for {} windows [{}]", backend.name(), got.size(),
                                     chunk.size(), id_list(chunk)));
    }
    for (auto& dets : got) {
      std::erase_if(dets, [&](const Detection& d) {
        return !(d.cx >= 0 && d.cx < cfg.window_size && d.cy >= 0 && d.cy < cfg.window_size);
      });
      for (const auto& d : dets) {
        if (d.class_id < 0 || d.class_id >= num_classes) {
          throw BackendError(fmt::format("backend {} emitted class {} outside [0, {})", backend.name(), d.class_id,
                                         num_classes));
        }
      }
      std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
      if (dets.size() > static_cast<size_t>(cfg.top_k)) dets.resize(cfg.top_k);
      out.push_back(std::move(dets));
    }
  }
  return out;
}

std::vector<Detection> oracle_detect(std::span<const Annotation> annotations, const Rect& window) {
  std::vector<Detection> out;
  for (const auto& a : annotations) {
    if (window.contains(a.cx, a.cy)) {
      out.push_back({a.cx - window.x0, a.cy - window.y0, a.w, a.h, a.class_id, 1.0});
    }
  }
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

void NoiseSpec::validate() const {
  for (double p : {drop_prob, class_flip_prob}) {
    if (!(p >= 0 && p <= 1)) throw UsageError("noise probabilities must be in [0, 1]");
  }
  if (!(jitter_sigma >= 0)) throw UsageError("jitter_sigma must be >= 0");
  if (!(false_positive_rate >= 0)) throw UsageError("false_positive_rate must be >= 0");
  check_range(score_range_true, "score_range_true");
  check_range(score_range_false, "score_range_false");
}

std::vector<Detection> jitter_detect(std::span<const Annotation> annotations, const Rect& window,
                                     const NoiseSpec& noise, int num_classes) {
  noise.validate();
  if (num_classes <= 0) throw UsageError("num_classes must be > 0");
  std::vector<Detection> out;
  for (size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    // Cheap reject before seeding: jitter beyond 8 sigma is not reachable in practice.
    const double reach = 8 * noise.jitter_sigma;
    if (a.cx < window.x0 - reach || a.cx >= window.x1 + reach || a.cy < window.y0 - reach ||
        a.cy >= window.y1 + reach) {
      continue;
    }
    std::mt19937_64 rng(splitmix64(noise.rng_seed ^ splitmix64(i)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const bool drop = u01(rng) < noise.drop_prob;
    const double jx = noise.jitter_sigma > 0 ? gauss(rng) * noise.jitter_sigma : 0.0;
    const double jy = noise.jitter_sigma > 0 ? gauss(rng) * noise.jitter_sigma : 0.0;
    int cls = a.class_id;
    if (num_classes > 1 && u01(rng) < noise.class_flip_prob) {
      const int k = std::uniform_int_distribution<int>(0, num_classes - 2)(rng);
      cls = k >= a.class_id ? k + 1 : k;
    }
    const double score = draw_in(rng, noise.score_range_true);
    if (drop) continue;
    const double cx = a.cx + jx, cy = a.cy + jy;
    if (!window.contains(cx, cy)) continue;
    out.push_back({cx - window.x0, cy - window.y0, a.w, a.h, cls, score});
  }
  if (noise.false_positive_rate > 0) {
    const uint64_t key = splitmix64(static_cast<uint64_t>(window.x0) * 0x100000001b3ULL ^
                                    splitmix64(static_cast<uint64_t>(window.y0)));
    std::mt19937_64 rng(splitmix64(noise.rng_seed + 1) ^ key);
    const int n = std::poisson_distribution<int>(noise.false_positive_rate)(rng);
    std::uniform_real_distribution<double> ux(0.0, window.width()), uy(0.0, window.height());
    std::uniform_int_distribution<int> uc(0, num_classes - 1);
    for (int k = 0; k < n; ++k) {
      const double cx = ux(rng), cy = uy(rng);
      const int cls = uc(rng);
      out.push_back({cx, cy, 12.0, 12.0, cls, draw_in(rng, noise.score_range_false)});
    }
  }
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

std::vector<Detection> filter_by_confidence(std::span<const Detection> dets, double tau) {
  if (!(tau >= 0 && tau <= 1)) throw UsageError(fmt::format("confidence threshold {} outside [0, 1]", tau));
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.score >= tau) out.push_back(d);
  }
  return out;
}

OracleBackend::OracleBackend(std::vector<Annotation> annotations) : annotations_(std::move(annotations)) {
  std::stable_sort(annotations_.begin(), annotations_.end(),
                   [](const Annotation& a, const Annotation& b) { return a.cy < b.cy; });
}

WindowResults OracleBackend::infer(std::span<const WindowItem> batch, const DetectorConfig&) {
  WindowResults out;
  out.reserve(batch.size());
  for (const auto& w : batch) {
    const auto lo = std::lower_bound(annotations_.begin(), annotations_.end(), w.source_rect.y0,
                                     [](const Annotation& a, double y) { return a.cy < y; });
    const auto hi = std::lower_bound(lo, annotations_.end(), w.source_rect.y1,
                                     [](const Annotation& a, double y) { return a.cy < y; });
    auto dets = oracle_detect(std::span<const Annotation>(lo, hi), w.source_rect);
    to_window_pixels(dets, w.downsample);
    out.push_back(std::move(dets));
  }
  return out;
}

JitterBackend::JitterBackend(std::vector<Annotation> annotations, NoiseSpec noise)
    : annotations_(std::move(annotations)), noise_(noise) {
  noise_.validate();
}

WindowResults JitterBackend::infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) {
  WindowResults out;
  out.reserve(batch.size());
  for (const auto& w : batch) {
    auto dets = jitter_detect(annotations_, w.source_rect, noise_, static_cast<int>(cfg.class_names.size()));
    to_window_pixels(dets, w.downsample);
    out.push_back(std::move(dets));
  }
  return out;
}

}  // namespace wsinuc
