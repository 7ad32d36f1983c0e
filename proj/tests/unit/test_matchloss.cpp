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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "wsinuc/errors.hpp"
#include "wsinuc/matchloss.hpp"

using namespace wsinuc;

namespace {

double brute_force_min(const CostMatrix& c) {
  const bool t = c.rows > c.cols;
  const size_t small = t ? c.cols : c.rows, big = t ? c.rows : c.cols;
  std::vector<size_t> perm(big);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0;
    for (size_t i = 0; i < small; ++i) s += t ? c.at(perm[i], i) : c.at(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return small == 0 ? 0 : best;
}

BoxXYXY random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  const double x = u(rng), y = u(rng);
  return {x, y, x + 0.01 + u(rng), y + 0.01 + u(rng)};
}

}  // namespace

TEST_CASE("box conversions") {
  const BoxCxCyWH b{0.5, 0.4, 0.2, 0.1};
  const BoxXYXY x = to_xyxy(b);
  CHECK(x.x1 == doctest::Approx(0.4));
  CHECK(x.y2 == doctest::Approx(0.45));
  const BoxCxCyWH back = to_cxcywh(x);
  CHECK(back.cx == doctest::Approx(b.cx));
  CHECK(back.h == doctest::Approx(b.h));
}

TEST_CASE("giou examples") {
  CHECK(std::abs(giou(BoxXYXY{0, 0, 2, 2}, BoxXYXY{0, 0, 2, 2}) - 1.0) < 1e-12);
  CHECK(std::abs(giou(BoxXYXY{0, 0, 2, 2}, BoxXYXY{1, 1, 3, 3}) - (-5.0 / 63.0)) < 1e-12);
  CHECK(std::abs(giou(BoxXYXY{0, 0, 1, 1}, BoxXYXY{2, 0, 3, 1}) - (-1.0 / 3.0)) < 1e-12);
  CHECK(std::abs(iou(BoxXYXY{0, 0, 2, 2}, BoxXYXY{1, 1, 3, 3}) - 1.0 / 7.0) < 1e-12);
  CHECK_THROWS_AS(giou(BoxXYXY{0, 0, 0, 1}, BoxXYXY{0, 0, 1, 1}), UsageError);
}

TEST_CASE("giou properties") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2, 2), s(0.1, 5);
  for (int t = 0; t < 1000; ++t) {
    const BoxXYXY a = random_box(rng), b = random_box(rng);
    const double g = giou(a, b), i = iou(a, b);
    CHECK(g <= i + 1e-15);
    CHECK(g >= -1.0);
    CHECK(g == doctest::Approx(giou(b, a)).epsilon(1e-12));
    const double dx = u(rng), dy = u(rng), k = s(rng);
    auto move = [&](BoxXYXY x) { return BoxXYXY{(x.x1 + dx) * k, (x.y1 + dy) * k, (x.x2 + dx) * k, (x.y2 + dy) * k}; };
    CHECK(giou(move(a), move(b)) == doctest::Approx(g).epsilon(1e-9));
  }
}

TEST_CASE("l1 box") {
  CHECK(l1_box({0.5, 0.5, 0.1, 0.1}, {0.5, 0.5, 0.1, 0.1}) == 0);
  CHECK(l1_box({0.6, 0.5, 0.1, 0.1}, {0.5, 0.5, 0.1, 0.1}) == doctest::Approx(0.1));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const BoxCxCyWH a{u(rng), u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng), u(rng)};
    const double expect = std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) + std::abs(a.h - b.h);
    CHECK(std::abs(l1_box(a, b) - expect) < 1e-15);
  }
}

TEST_CASE("focal loss") {
  const std::vector<double> perfect{0, 1, 0};
  CHECK(focal_loss(perfect, 1, 0.25, 2).value == 0);
  const std::vector<double> half{0.5, 0.5};
  CHECK(std::abs(focal_loss(half, 0, 1, 0).value - std::log(2.0)) < 1e-12);
  const std::vector<double> p9{0.9, 0.1};
  CHECK(std::abs(focal_loss(p9, 0, 0.25, 2).value - 0.25 * 0.01 * -std::log(0.9)) < 1e-12);
  CHECK(focal_loss(p9, 0, 0.25, 2).value == doctest::Approx(2.634e-4).epsilon(1e-3));
  const FocalResult z = focal_loss(perfect, 0, 0.25, 2);
  CHECK(z.clamped);
  CHECK(std::isfinite(z.value));
  const std::vector<double> bad{0.5, 0.4};
  CHECK_THROWS_AS(focal_loss(bad, 0, 0.25, 2), UsageError);
  double prev = INFINITY;
  for (int k = 1; k <= 1000; ++k) {
    const double pt = k / 1000.0;
    const std::vector<double> p{pt, 1 - pt};
    const double v = focal_loss(p, 0, 0.25, 2).value;
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("default weights") {
  const CostWeights m = CostWeights::matcher(), l = CostWeights::loss();
  CHECK(m.giou == 2);
  CHECK(m.bbox == 2);
  CHECK(m.focal == 5);
  CHECK(l.giou == 2);
  CHECK(l.bbox == 1);
  CHECK(l.focal == 5);
  CHECK(l.alpha == 0.25);
  CostWeights bad;
  bad.bbox = -1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("pairwise cost") {
  const std::vector<Prediction> preds{{{0.3, 0.3, 0.2, 0.2}, {1, 0}}, {{0.7, 0.6, 0.2, 0.2}, {0, 1}}};
  const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.2, 0.2}, 0}, {{0.7, 0.7, 0.2, 0.2}, 1}};
  const CostWeights w = CostWeights::matcher();
  SUBCASE("hand values with the negative-probability class term") {
    const CostMatrix c = pairwise_cost(preds, gts, w, ClassCost::kNegativeProbability);
    CHECK(c.at(0, 0) == doctest::Approx(-5.0));
    // pred 1 vs gt 1: l1 = 0.1; boxes [0.6,0.5,0.8,0.7] vs [0.6,0.6,0.8,0.8]: IoU = 0.02/0.06, enclosing 0.06.
    const double g11 = 1.0 / 3.0;
    CHECK(c.at(1, 1) == doctest::Approx(2 * 0.1 + 2 * (1 - g11) - 5).epsilon(1e-12));
    // pred 0 vs gt 1: l1 = 0.8; disjoint [0.2,0.2,0.4,0.4] vs [0.6,0.6,0.8,0.8]: union 0.08, enclosing 0.36.
    const double g01 = -(0.36 - 0.08) / 0.36;
    CHECK(c.at(0, 1) == doctest::Approx(2 * 0.8 + 2 * (1 - g01) - 0).epsilon(1e-12));
  }
  SUBCASE("exact prediction is the row minimum") {
    const CostMatrix c = pairwise_cost(preds, gts, w);
    CHECK(c.at(0, 0) < c.at(0, 1));
    CHECK(c.at(1, 1) < c.at(1, 0));
  }
  SUBCASE("empty side") {
    const CostMatrix c = pairwise_cost(preds, {}, w);
    CHECK(c.rows == 2);
    CHECK(c.cols == 0);
    CHECK(assign(c).pairs.empty());
  }
}

TEST_CASE("assign examples") {
  CostMatrix c(2, 2);
  c.data = {1, 2, 2, 4};
  const Assignment a = assign(c);
  CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
  CHECK(a.total_cost == 4);
  CostMatrix d(3, 3, 5);
  for (int i = 0; i < 3; ++i) d.at(i, i) = 0;
  CHECK(assign(d).pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
  CHECK(assign(d).total_cost == 0);
}

TEST_CASE("assign matches exhaustive search") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> side(0, 7), small(0, 9);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 300; ++t) {
    CostMatrix c(side(rng), side(rng));
    // Integer costs make ties common; reals exercise the general case.
    for (auto& v : c.data) v = t % 2 ? small(rng) : u(rng);
    const Assignment a = assign(c);
    CHECK(a.pairs.size() == std::min(c.rows, c.cols));
    std::vector<int> used(c.cols, 0);
    double sum = 0;
    for (auto [i, j] : a.pairs) {
      CHECK(used[j]++ == 0);
      sum += c.at(i, j);
    }
    CHECK(sum == a.total_cost);
    CHECK(a.total_cost == doctest::Approx(brute_force_min(c)).epsilon(1e-12));
  }
}

TEST_CASE("assign is permutation invariant") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 1000; ++t) {
    const size_t r = 1 + t % 6, k = 1 + (t / 6) % 6;
    CostMatrix c(r, k);
    for (auto& v : c.data) v = u(rng);
    std::vector<size_t> pr(r), pc(k);
    std::iota(pr.begin(), pr.end(), 0);
    std::iota(pc.begin(), pc.end(), 0);
    std::shuffle(pr.begin(), pr.end(), rng);
    std::shuffle(pc.begin(), pc.end(), rng);
    CostMatrix p(r, k);
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < k; ++j) p.at(i, j) = c.at(pr[i], pc[j]);
    }
    CHECK(assign(p).total_cost == doctest::Approx(assign(c).total_cost).epsilon(1e-12));
  }
}

TEST_CASE("set loss") {
  SUBCASE("perfect predictions") {
    const std::vector<Prediction> preds{{{0.3, 0.3, 0.2, 0.2}, {0, 1, 0}}};
    const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.2, 0.2}, 1}};
    CHECK(set_loss(preds, gts).total == 0);
  }
  SUBCASE("single hand case") {
    const std::vector<Prediction> preds{{{0.7, 0.6, 0.2, 0.2}, {0.2, 0.8}}};
    const std::vector<GroundTruth> gts{{{0.7, 0.7, 0.2, 0.2}, 1}};
    const SetLossResult r = set_loss(preds, gts);
    const double focal = -0.75 * 0.04 * std::log(0.8) + -0.25 * 0.04 * std::log(0.8);
    CHECK(r.bbox == doctest::Approx(0.1));
    CHECK(r.giou == doctest::Approx(2.0 / 3.0));
    CHECK(r.focal == doctest::Approx(focal).epsilon(1e-12));
    CHECK(r.total == doctest::Approx(1 * 0.1 + 2 * (2.0 / 3.0) + 5 * focal).epsilon(1e-12));
  }
  SUBCASE("no ground truth is pure background") {
    const std::vector<Prediction> preds{{{0.5, 0.5, 0.1, 0.1}, {0.3, 0.7}}};
    const SetLossResult r = set_loss(preds, {});
    const double bg = -0.75 * 0.09 * std::log(0.7) + -0.75 * 0.49 * std::log(0.3);
    CHECK(r.total == doctest::Approx(5 * bg).epsilon(1e-12));
    CHECK(r.assignment.pairs.empty());
  }
}
