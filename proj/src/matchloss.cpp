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

#include "wsinuc/matchloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "wsinuc/errors.hpp"

namespace wsinuc {
namespace {

constexpr double kProbFloor = 1e-12;
// Log guard inside the matcher's class cost.
constexpr double kCostEps = 1e-8;

double area(const BoxXYXY& b) { return (b.x2 - b.x1) * (b.y2 - b.y1); }

void check_box(const BoxXYXY& b) {
  if (!(b.x2 > b.x1 && b.y2 > b.y1)) {
    throw UsageError(fmt::format("degenerate box ({}, {}, {}, {})", b.x1, b.y1, b.x2, b.y2));
  }
}

}  // namespace

BoxXYXY to_xyxy(const BoxCxCyWH& b) {
  return {b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2};
}

BoxCxCyWH to_cxcywh(const BoxXYXY& b) {
  return {(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2, b.x2 - b.x1, b.y2 - b.y1};
}

double iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double giou(const BoxXYXY& a, const BoxXYXY& b) {
  check_box(a);
  check_box(b);
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  const double enclosing = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  return inter / uni - (enclosing - uni) / enclosing;
}

double l1_box(const BoxCxCyWH& a, const BoxCxCyWH& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) + std::abs(a.h - b.h);
}

FocalResult focal_loss(std::span<const double> p, int target, double alpha, double gamma) {
  if (target < 0 || static_cast<size_t>(target) >= p.size()) {
    throw UsageError(fmt::format("focal target {} outside [0, {})", target, p.size()));
  }
  double sum = 0;
  for (double v : p) {
    if (!(v >= 0 && v <= 1)) throw UsageError("probabilities must lie in [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw UsageError(fmt::format("probabilities sum to {}, not 1", sum));
  FocalResult r;
  double pt = p[target];
  if (pt < kProbFloor) {
    pt = kProbFloor;
    r.clamped = true;
  }
  r.value = -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
  return r;
}

double binary_focal(double p, bool positive, double alpha, double gamma) {
  const double pt = std::max(positive ? p : 1.0 - p, kProbFloor);
  const double at = positive ? alpha : 1.0 - alpha;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

void CostWeights::validate() const {
  for (double v : {giou, bbox, focal, alpha, gamma}) {
    if (!(v >= 0)) throw UsageError("cost weights must be >= 0");
  }
  if (alpha > 1) throw UsageError("focal alpha must be <= 1");
}

CostMatrix pairwise_cost(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                         const CostWeights& w, ClassCost form) {
  w.validate();
  CostMatrix c(preds.size(), gts.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    for (size_t j = 0; j < gts.size(); ++j) {
      const int k = gts[j].class_id;
      if (k < 0 || static_cast<size_t>(k) >= preds[i].probs.size()) {
        throw UsageError(fmt::format("gt class {} has no prediction probability", k));
      }
      const double p = preds[i].probs[k];
      double cls;
      if (form == ClassCost::kFocalDifference) {
        const double pos = w.alpha * std::pow(1.0 - p, w.gamma) * -std::log(p + kCostEps);
        const double neg = (1.0 - w.alpha) * std::pow(p, w.gamma) * -std::log(1.0 - p + kCostEps);
        cls = pos - neg;
      } else {
        cls = -p;
      }
      c.at(i, j) = w.bbox * l1_box(preds[i].box, gts[j].box) + w.giou * (1.0 - giou(preds[i].box, gts[j].box)) +
                   w.focal * cls;
    }
  }
  return c;
}

SetLossResult set_loss(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                       const CostWeights& matcher, const CostWeights& loss, ClassCost form) {
  loss.validate();
  SetLossResult r;
  r.assignment = assign(pairwise_cost(preds, gts, matcher, form));
  std::vector<int> target(preds.size(), -1);
  for (const auto& [i, j] : r.assignment.pairs) {
    target[i] = gts[j].class_id;
    r.bbox += l1_box(preds[i].box, gts[j].box);
    r.giou += 1.0 - giou(preds[i].box, gts[j].box);
  }
  for (size_t i = 0; i < preds.size(); ++i) {
    for (size_t k = 0; k < preds[i].probs.size(); ++k) {
      r.focal += binary_focal(preds[i].probs[k], target[i] == static_cast<int>(k), loss.alpha, loss.gamma);
    }
  }
  r.total = loss.bbox * r.bbox + loss.giou * r.giou + loss.focal * r.focal;
  return r;
}

}  // namespace wsinuc
