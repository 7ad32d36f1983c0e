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

#include <span>
#include <utility>
#include <vector>

namespace wsinuc {

// Box as centre and size, normalized to the image side.
struct BoxCxCyWH {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
};

struct BoxXYXY {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;
};

BoxXYXY to_xyxy(const BoxCxCyWH& b);
BoxCxCyWH to_cxcywh(const BoxXYXY& b);

double iou(const BoxXYXY& a, const BoxXYXY& b);
// Throws UsageError for a zero-area (or inverted) box.
double giou(const BoxXYXY& a, const BoxXYXY& b);
inline double giou(const BoxCxCyWH& a, const BoxCxCyWH& b) { return giou(to_xyxy(a), to_xyxy(b)); }
double l1_box(const BoxCxCyWH& a, const BoxCxCyWH& b);

struct FocalResult {
  double value = 0;
  // p_t was below 1e-12 and got clamped.
  bool clamped = false;
};

// -alpha * (1 - p_t)^gamma * ln(p_t), p_t = p[target]. `p` must sum to 1
// within 1e-6.
FocalResult focal_loss(std::span<const double> p, int target, double alpha, double gamma);

// Binary (per-class) focal term for probability p of a class whose target
// is `positive`.
double binary_focal(double p, bool positive, double alpha, double gamma);

struct CostWeights {
  double giou = 2;
  double bbox = 2;
  double focal = 5;
  double alpha = 0.25;
  double gamma = 2;

  static CostWeights matcher() { return {2, 2, 5, 0.25, 2}; }
  static CostWeights loss() { return {2, 1, 5, 0.25, 2}; }
  void validate() const;
};

enum class ClassCost {
  // alpha (1-p)^gamma (-ln p) - (1-alpha) p^gamma (-ln(1-p)), p = prob of the gt class
  kFocalDifference,
  // -p
  kNegativeProbability,
};

struct Prediction {
  BoxCxCyWH box;
  std::vector<double> probs;  // per class
};

struct GroundTruth {
  BoxCxCyWH box;
  int class_id = 0;
};

// Dense row-major matrix; rows are predictions, columns ground truths.
struct CostMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(size_t r, size_t c, double fill = 0) : rows(r), cols(c), data(r * c, fill) {}
  double& at(size_t i, size_t j) { return data[i * cols + j]; }
  double at(size_t i, size_t j) const { return data[i * cols + j]; }
};

CostMatrix pairwise_cost(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                         const CostWeights& w, ClassCost form = ClassCost::kFocalDifference);

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), ascending by row
  double total_cost = 0;
};

// Minimum-cost one-to-one assignment of size min(rows, cols) (Hungarian
// method with shortest augmenting paths, O(n^2 m)). Entries must be finite.
Assignment assign(const CostMatrix& cost);

struct SetLossResult {
  double total = 0;
  double bbox = 0;   // sum of matched L1, unweighted
  double giou = 0;   // sum of matched (1 - GIoU), unweighted
  double focal = 0;  // per-class binary focal over all queries, unweighted
  Assignment assignment;
};

// Matches with `matcher` weights, then scores with `loss` weights. The
// focal term treats each class probability as an independent binary
// target: 1 for the matched ground-truth class, 0 otherwise (background).
SetLossResult set_loss(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                       const CostWeights& matcher = CostWeights::matcher(),
                       const CostWeights& loss = CostWeights::loss(),
                       ClassCost form = ClassCost::kFocalDifference);

}  // namespace wsinuc
