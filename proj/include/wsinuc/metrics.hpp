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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsinuc/annotations.hpp"
#include "wsinuc/geometry.hpp"

namespace wsinuc {

struct Point2 {
  double x = 0;
  double y = 0;
};

struct MatchPair {
  int gt = 0;
  int pred = 0;
  double distance = 0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // ascending by gt
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;

  int64_t tp() const { return static_cast<int64_t>(pairs.size()); }
  int64_t fn() const { return static_cast<int64_t>(unmatched_gt.size()); }
  int64_t fp() const { return static_cast<int64_t>(unmatched_pred.size()); }
};

enum class MatchMode {
  // Maximum-cardinality matching within the radius, minimal total distance.
  kOptimal,
  // Repeatedly pair the closest remaining (gt, pred) within the radius.
  kGreedy,
};

// Distance threshold is radius_um / mpp pixels, inclusive. The radius graph
// is split into connected components, each solved with `assign` using a
// 1e9 sentinel for pairs beyond the radius.
MatchResult match_centroids(std::span<const Point2> gt, std::span<const Point2> pred, double radius_um, double mpp,
                            MatchMode mode = MatchMode::kOptimal);

struct Scores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  // Some ratio was 0/0 and reported as 0.
  bool zero_division = false;
};

Scores detection_metrics(const MatchResult& m);

struct ClassCount {
  int64_t tp = 0;
  int64_t tn = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  // Detection errors carrying this class (used by the restricted variant).
  int64_t unmatched_pred = 0;
  int64_t unmatched_gt = 0;
};

// Per class over matched pairs: TP both c, FP pred c only, FN gt c only,
// TN neither. Labels are indexed like the points given to match_centroids.
std::vector<ClassCount> classification_counts(const MatchResult& m, std::span<const int> gt_labels,
                                              std::span<const int> pred_labels, int num_classes);

// F_c = 2(TP+TN) / (2(TP+TN) + 2FP + 2FN + FP_det + FN_det)
// P_c = (TP+TN) / (TP+TN + 2FP + FP_det)
// R_c = (TP+TN) / (TP+TN + 2FN + FN_det)
// FP_det / FN_det are the global detection errors, or with `restricted`
// only those labelled c.
std::vector<Scores> classification_metrics(std::span<const ClassCount> counts, const MatchResult& m,
                                           bool restricted = false);

// Unweighted mean; throws UsageError on an empty list.
double macro_average(std::span<const double> values);

struct EvalOptions {
  double radius_um = 3.0;
  // Resolution of the coordinates; 0 means take it from the annotation set.
  double mpp = 0;
  MatchMode mode = MatchMode::kOptimal;
  bool restricted_class_errors = false;
  std::vector<std::string> class_names;
  // Predictions below this score are discarded before matching.
  double threshold = 0;
};

struct MetricsReport {
  double threshold = 0;
  double mpp = 0;
  double radius_px = 0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  Scores detection;
  std::vector<ClassCount> class_counts;
  std::vector<Scores> per_class;
  double macro_f = 0;
  std::vector<std::string> flags;
  std::map<std::string, MetricsReport> per_tissue;
};

MetricsReport evaluate(const AnnotationSet& gt, std::span<const Detection> preds, const EvalOptions& opts);

// Splits by annotation tissue tag (untagged annotations go to "untagged").
// A prediction belongs to the group of its nearest annotation. Names in
// `extra_groups` with no members get an all-zero report flagged
// "empty_group".
std::map<std::string, MetricsReport> per_tissue_report(const AnnotationSet& gt, std::span<const Detection> preds,
                                                       const EvalOptions& opts,
                                                       std::span<const std::string> extra_groups = {});

struct SweepPoint {
  double tau = 0;
  double f_det = 0;
  double macro_f = 0;
  double harmonic = 0;
};

struct SweepResult {
  double best_tau = 0;
  std::vector<SweepPoint> curve;
  // The harmonic mean was 0 at every grid point.
  bool degenerate = false;
};

// Maximizes the harmonic mean of F_det and macro-F over `grid` (nonempty,
// ascending); ties go to the larger tau.
SweepResult sweep_threshold(const AnnotationSet& gt, std::span<const Detection> preds,
                            std::span<const double> grid, const EvalOptions& opts);

std::string report_to_json(const MetricsReport& report, std::span<const std::string> class_names);
// Human-readable P/R/F table, one column group per class.
std::string report_to_table(const MetricsReport& report, std::span<const std::string> class_names);
std::string sweep_to_json(const SweepResult& sweep);

}  // namespace wsinuc
