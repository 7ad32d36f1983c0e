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

#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "wsinuc/detector.hpp"
#include "wsinuc/errors.hpp"

using namespace wsinuc;

namespace {

std::vector<Annotation> grid_nuclei() {
  std::vector<Annotation> out;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) out.push_back({x * 50.0 + 5, y * 50.0 + 5, 10, 10, (x + y) % 5, {}});
  }
  return out;
}

std::vector<WindowItem> windows(int n, int size = 256) {
  std::vector<WindowItem> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({i, RasterImage(size, size), Rect::from_origin_size(i * 37.0, i * 11.0, size, size), 1.0});
  }
  return out;
}

// Scripted backend for contract checks.
class ScriptBackend : public DetectorBackend {
 public:
  std::function<WindowResults(std::span<const WindowItem>)> fn;
  std::vector<size_t> calls;
  std::string name() const override { return "script"; }
  WindowResults infer(std::span<const WindowItem> batch, const DetectorConfig&) override {
    calls.push_back(batch.size());
    return fn(batch);
  }
};

}  // namespace

TEST_CASE("config validation") {
  DetectorConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.num_queries == 900);
  CHECK(c.top_k == 300);
  c.top_k = 901;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.confidence_threshold = 1.5;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("oracle_detect") {
  const auto gt = grid_nuclei();
  const auto dets = oracle_detect(gt, {0, 0, 100, 100});
  CHECK(dets.size() == 4);
  CHECK(dets[0].score == 1.0);
  const auto shifted = oracle_detect(gt, {55, 55, 105, 105});
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0].cx == 0);  // half-open: 55 is inside
  CHECK(oracle_detect(gt, {1000, 1000, 1100, 1100}).empty());
}

TEST_CASE("oracle backend honours downsample") {
  OracleBackend b(grid_nuclei());
  const std::vector<WindowItem> w{{0, RasterImage(128, 128), {0, 0, 256, 256}, 2.0}};
  DetectorConfig cfg;
  cfg.window_size = 128;
  const auto out = detect(b, w, cfg);
  REQUIRE(out[0].size() == 36);
  for (const auto& d : out[0]) {
    CHECK(d.cx < 128);
    CHECK(d.w == 5);
  }
}

TEST_CASE("detect contract") {
  DetectorConfig cfg;
  ScriptBackend b;
  SUBCASE("sorted by score, truncated to top_k, out-of-window dropped") {
    cfg.top_k = 2;
    b.fn = [](std::span<const WindowItem> batch) {
      WindowResults r(batch.size());
      for (auto& l : r) l = {{1, 1, 2, 2, 0, 0.2}, {2, 2, 2, 2, 1, 0.9}, {300, 3, 2, 2, 0, 1.0}, {3, 3, 2, 2, 2, 0.5}};
      return r;
    };
    const auto out = detect(b, windows(1), cfg);
    REQUIRE(out[0].size() == 2);
    CHECK(out[0][0].score == 0.9);
    CHECK(out[0][1].score == 0.5);
  }
  SUBCASE("wrong list count") {
    b.fn = [](std::span<const WindowItem>) { return WindowResults(1); };
    CHECK_THROWS_AS(detect(b, windows(3), cfg), BackendError);
  }
  SUBCASE("bad class id") {
    b.fn = [](std::span<const WindowItem> batch) {
      WindowResults r(batch.size());
      r[0] = {{1, 1, 2, 2, 9, 0.5}};
      return r;
    };
    CHECK_THROWS_AS(detect(b, windows(1), cfg), BackendError);
  }
  SUBCASE("failures name the windows") {
    b.fn = [](std::span<const WindowItem>) -> WindowResults { throw std::runtime_error("boom"); };
    try {
      detect(b, windows(2), cfg);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(std::string(e.what()).find("[0,1]") != std::string::npos);
    }
  }
  SUBCASE("wrong window size") {
    b.fn = [](std::span<const WindowItem> batch) { return WindowResults(batch.size()); };
    CHECK_THROWS_AS(detect(b, windows(1, 128), cfg), UsageError);
  }
}

TEST_CASE("batch invariance") {
  OracleBackend b(grid_nuclei());
  const auto ws = windows(7);
  DetectorConfig one, many;
  one.max_batch = 1;
  many.max_batch = 16;
  CHECK(detect(b, ws, one) == detect(b, ws, many));
  ScriptBackend s;
  s.fn = [](std::span<const WindowItem> batch) { return WindowResults(batch.size()); };
  DetectorConfig three;
  three.max_batch = 3;
  detect(s, ws, three);
  CHECK(s.calls == std::vector<size_t>{3, 3, 1});
}

TEST_CASE("jitter detector") {
  const auto gt = grid_nuclei();
  const Rect all{0, 0, 500, 500};
  SUBCASE("no noise equals the oracle") {
    CHECK(jitter_detect(gt, all, {}, 5) == oracle_detect(gt, all));
  }
  SUBCASE("overlapping windows see identical perturbations") {
    NoiseSpec n;
    n.jitter_sigma = 1.5;
    n.class_flip_prob = 0.3;
    n.score_range_true = {0.5, 1.0};
    n.rng_seed = 17;
    const auto a = jitter_detect(gt, {0, 0, 300, 300}, n, 5);
    const auto b = jitter_detect(gt, {100, 100, 400, 400}, n, 5);
    std::set<std::tuple<double, double, int, double>> sa, sb;
    for (const auto& d : a) {
      if (Rect{100, 100, 300, 300}.contains(d.cx, d.cy)) sa.insert({d.cx, d.cy, d.class_id, d.score});
    }
    for (const auto& d : b) {
      const double x = d.cx + 100, y = d.cy + 100;
      if (Rect{100, 100, 300, 300}.contains(x, y)) sb.insert({x, y, d.class_id, d.score});
    }
    CHECK(!sa.empty());
    CHECK(sa == sb);
  }
  SUBCASE("drop everything") {
    NoiseSpec n;
    n.drop_prob = 1.0;
    CHECK(jitter_detect(gt, all, n, 5).empty());
  }
  SUBCASE("false positives are seeded by the window") {
    NoiseSpec n;
    n.false_positive_rate = 5;
    n.score_range_false = {0.1, 0.3};
    const auto a = jitter_detect({}, {256, 0, 512, 256}, n, 5);
    CHECK(a == jitter_detect({}, {256, 0, 512, 256}, n, 5));
    for (const auto& d : a) CHECK(d.score <= 0.3);
  }
  SUBCASE("validation") {
    NoiseSpec n;
    n.score_range_true = {0.9, 0.1};
    CHECK_THROWS_AS(jitter_detect(gt, all, n, 5), UsageError);
  }
}

TEST_CASE("filter_by_confidence") {
  const std::vector<Detection> d{{0, 0, 1, 1, 0, 0.9}, {0, 0, 1, 1, 0, 0.5}, {0, 0, 1, 1, 0, 0.49}};
  CHECK(filter_by_confidence(d, 0.5).size() == 2);
  CHECK(filter_by_confidence(d, 0.0).size() == 3);
  CHECK_THROWS_AS(filter_by_confidence(d, 1.1), UsageError);
}
