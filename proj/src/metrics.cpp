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

#include "wsinuc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include "json.hpp"

#include "wsinuc/detector.hpp"
#include "wsinuc/errors.hpp"
#include "wsinuc/kernels/kernels.hpp"
#include "wsinuc/matchloss.hpp"

namespace wsinuc {
namespace {

constexpr double kSentinel = 1e9;

double ratio(double num, double den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return num / den;
}

// Buckets of side `cell` over a point set.
class PointGrid {
 public:
  PointGrid(std::span<const Point2> pts, double cell) : pts_(pts), cell_(cell) {
    for (size_t i = 0; i < pts.size(); ++i) buckets_[key(cx(pts[i].x), cx(pts[i].y))].push_back(static_cast<int>(i));
  }

  template <typename F>
  void for_each_near(const Point2& q, int ring, F&& f) const {
    const int64_t gx = cx(q.x), gy = cx(q.y);
    for (int64_t y = gy - ring; y <= gy + ring; ++y) {
      for (int64_t x = gx - ring; x <= gx + ring; ++x) {
        auto it = buckets_.find(key(x, y));
        if (it == buckets_.end()) continue;
        for (int i : it->second) f(i);
      }
    }
  }

  // Indices in the square ring at Chebyshev distance exactly `ring` cells.
  template <typename F>
  void for_each_on_ring(const Point2& q, int64_t ring, F&& f) const {
    const int64_t gx = cx(q.x), gy = cx(q.y);
    for (int64_t y = gy - ring; y <= gy + ring; ++y) {
      for (int64_t x = gx - ring; x <= gx + ring; ++x) {
        if (std::max(std::abs(x - gx), std::abs(y - gy)) != ring) continue;
        auto it = buckets_.find(key(x, y));
        if (it == buckets_.end()) continue;
        for (int i : it->second) f(i);
      }
    }
  }

  double cell() const { return cell_; }

 private:
  int64_t cx(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }
  static int64_t key(int64_t x, int64_t y) { return (x << 32) ^ (y & 0xffffffff); }

  std::span<const Point2> pts_;
  double cell_;
  std::unordered_map<int64_t, std::vector<int>> buckets_;
};

double dist(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Edge {
  double d;
  int gt;
  int pred;
};

}  // namespace

MatchResult match_centroids(std::span<const Point2> gt, std::span<const Point2> pred, double radius_um, double mpp,
                            MatchMode mode) {
  if (!(radius_um > 0)) throw UsageError("matching radius must be > 0");
  if (!(mpp > 0)) throw UsageError("mpp must be > 0 for matching");
  const double radius = radius_um / mpp;

  std::vector<Edge> edges;
  if (!gt.empty() && !pred.empty()) {
    PointGrid grid(pred, radius);
    for (size_t g = 0; g < gt.size(); ++g) {
      grid.for_each_near(gt[g], 1, [&](int p) {
        const double d = dist(gt[g], pred[p]);
        if (d <= radius) edges.push_back({d, static_cast<int>(g), p});
      });
    }
  }

  std::vector<int> gt_match(gt.size(), -1), pred_match(pred.size(), -1);
  std::vector<double> gt_dist(gt.size(), 0);
  if (mode == MatchMode::kGreedy) {
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return std::tie(a.d, a.gt, a.pred) < std::tie(b.d, b.gt, b.pred); });
    for (const auto& e : edges) {
      if (gt_match[e.gt] >= 0 || pred_match[e.pred] >= 0) continue;
      gt_match[e.gt] = e.pred;
      pred_match[e.pred] = e.gt;
      gt_dist[e.gt] = e.d;
    }
  } else {
    // Nodes: gts first, then preds.
    const int n_gt = static_cast<int>(gt.size());
    DisjointSet ds(gt.size() + pred.size());
    for (const auto& e : edges) ds.unite(e.gt, n_gt + e.pred);
    std::map<int, std::pair<std::vector<int>, std::vector<int>>> components;
    for (const auto& e : edges) {
      (void)components[ds.find(e.gt)];
    }
    for (int g = 0; g < n_gt; ++g) {
      auto it = components.find(ds.find(g));
      if (it != components.end()) it->second.first.push_back(g);
    }
    for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
      auto it = components.find(ds.find(n_gt + p));
      if (it != components.end()) it->second.second.push_back(p);
    }
    const auto& k = kernels::active();
    std::vector<double> ax, ay, bx, by;
    for (const auto& [root, members] : components) {
      const auto& [gs, ps] = members;
      ax.clear(), ay.clear(), bx.clear(), by.clear();
      for (int g : gs) ax.push_back(gt[g].x), ay.push_back(gt[g].y);
      for (int p : ps) bx.push_back(pred[p].x), by.push_back(pred[p].y);
      CostMatrix c(gs.size(), ps.size());
      k.pairwise_distance(ax.data(), ay.data(), gs.size(), bx.data(), by.data(), ps.size(), c.data.data());
      for (double& v : c.data) {
        if (!(v <= radius)) v = kSentinel;
      }
      const Assignment a = assign(c);
      for (const auto& [i, j] : a.pairs) {
        const double d = c.at(i, j);
        if (d >= kSentinel) continue;
        gt_match[gs[i]] = ps[j];
        pred_match[ps[j]] = gs[i];
        gt_dist[gs[i]] = d;
      }
    }
  }

  MatchResult r;
  for (size_t g = 0; g < gt.size(); ++g) {
    if (gt_match[g] >= 0) {
      r.pairs.push_back({static_cast<int>(g), gt_match[g], gt_dist[g]});
    } else {
      r.unmatched_gt.push_back(static_cast<int>(g));
    }
  }
  for (size_t p = 0; p < pred.size(); ++p) {
    if (pred_match[p] < 0) r.unmatched_pred.push_back(static_cast<int>(p));
  }
  return r;
}

Scores detection_metrics(const MatchResult& m) {
  Scores s;
  const double tp = static_cast<double>(m.tp());
  s.precision = ratio(tp, tp + m.fp(), s.zero_division);
  s.recall = ratio(tp, tp + m.fn(), s.zero_division);
  s.f1 = ratio(2 * s.precision * s.recall, s.precision + s.recall, s.zero_division);
  return s;
}

std::vector<ClassCount> classification_counts(const MatchResult& m, std::span<const int> gt_labels,
                                              std::span<const int> pred_labels, int num_classes) {
  if (num_classes <= 0) throw UsageError("num_classes must be > 0");
  auto check = [&](int label) {
    if (label < 0 || label >= num_classes) {
      throw UsageError(fmt::format("class label {} outside [0, {})", label, num_classes));
    }
    return label;
  };
  std::vector<ClassCount> counts(num_classes);
  for (const auto& p : m.pairs) {
    const int g = check(gt_labels[p.gt]);
    const int q = check(pred_labels[p.pred]);
    for (int c = 0; c < num_classes; ++c) {
      auto& k = counts[c];
      if (g == c && q == c) {
        ++k.tp;
      } else if (q == c) {
        ++k.fp;
      } else if (g == c) {
        ++k.fn;
      } else {
        ++k.tn;
      }
    }
  }
  for (int g : m.unmatched_gt) ++counts[check(gt_labels[g])].unmatched_gt;
  for (int p : m.unmatched_pred) ++counts[check(pred_labels[p])].unmatched_pred;
  return counts;
}

std::vector<Scores> classification_metrics(std::span<const ClassCount> counts, const MatchResult& m,
                                           bool restricted) {
  std::vector<Scores> out;
  out.reserve(counts.size());
  for (const auto& k : counts) {
    const double fp_det = static_cast<double>(restricted ? k.unmatched_pred : m.fp());
    const double fn_det = static_cast<double>(restricted ? k.unmatched_gt : m.fn());
    const double correct = static_cast<double>(k.tp + k.tn);
    Scores s;
    s.f1 = ratio(2 * correct, 2 * correct + 2.0 * k.fp + 2.0 * k.fn + fp_det + fn_det, s.zero_division);
    s.precision = ratio(correct, correct + 2.0 * k.fp + fp_det, s.zero_division);
    s.recall = ratio(correct, correct + 2.0 * k.fn + fn_det, s.zero_division);
    out.push_back(s);
  }
  return out;
}

double macro_average(std::span<const double> values) {
  if (values.empty()) throw UsageError("macro average of an empty list");
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

namespace {

std::vector<std::string> class_names_of(const EvalOptions& opts) {
  return opts.class_names.empty() ? default_class_names() : opts.class_names;
}

double resolve_mpp(const AnnotationSet& gt, const EvalOptions& opts) {
  const double mpp = opts.mpp > 0 ? opts.mpp : gt.mpp;
  if (!(mpp > 0)) throw UsageError("evaluation needs an mpp (annotations carry none; pass one explicitly)");
  return mpp;
}

MetricsReport evaluate_subset(std::span<const Annotation> gt, std::span<const Detection> preds, double mpp,
                              const EvalOptions& opts) {
  const auto names = class_names_of(opts);
  const int num_classes = static_cast<int>(names.size());
  if (!(opts.threshold >= 0 && opts.threshold <= 1)) throw UsageError("threshold must be in [0, 1]");
  const auto kept = filter_by_confidence(preds, opts.threshold);

  std::vector<Point2> gp, pp;
  std::vector<int> gl, pl;
  for (const auto& a : gt) gp.push_back({a.cx, a.cy}), gl.push_back(a.class_id);
  for (const auto& d : kept) pp.push_back({d.cx, d.cy}), pl.push_back(d.class_id);
  const MatchResult m = match_centroids(gp, pp, opts.radius_um, mpp, opts.mode);

  MetricsReport r;
  r.threshold = opts.threshold;
  r.mpp = mpp;
  r.radius_px = opts.radius_um / mpp;
  r.tp = m.tp();
  r.fp = m.fp();
  r.fn = m.fn();
  r.detection = detection_metrics(m);
  r.class_counts = classification_counts(m, gl, pl, num_classes);
  r.per_class = classification_metrics(r.class_counts, m, opts.restricted_class_errors);
  std::vector<double> fs;
  for (const auto& s : r.per_class) fs.push_back(s.f1);
  r.macro_f = macro_average(fs);
  if (r.detection.zero_division) r.flags.push_back("detection_zero_division");
  for (int c = 0; c < num_classes; ++c) {
    if (r.per_class[c].zero_division) r.flags.push_back(fmt::format("class_zero_division:{}", names[c]));
  }
  return r;
}

// Nearest annotation for each prediction (ties: lowest index); -1 when there
// are no annotations.
std::vector<int> nearest_annotation(std::span<const Annotation> gt, std::span<const Detection> preds) {
  std::vector<int> out(preds.size(), -1);
  if (gt.empty()) return out;
  std::vector<Point2> pts;
  double x0 = gt[0].cx, x1 = x0, y0 = gt[0].cy, y1 = y0;
  for (const auto& a : gt) {
    pts.push_back({a.cx, a.cy});
    x0 = std::min(x0, a.cx), x1 = std::max(x1, a.cx), y0 = std::min(y0, a.cy), y1 = std::max(y1, a.cy);
  }
  const double extent = std::max({x1 - x0, y1 - y0, 1.0});
  const double cell = std::max(1.0, extent / std::max(1.0, std::sqrt(static_cast<double>(gt.size()))));
  PointGrid grid(pts, cell);
  const int64_t max_ring = static_cast<int64_t>(std::ceil(extent / cell)) + 2;
  for (size_t i = 0; i < preds.size(); ++i) {
    const Point2 q{preds[i].cx, preds[i].cy};
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (int64_t ring = 0;; ++ring) {
      grid.for_each_on_ring(q, ring, [&](int g) {
        const double d = dist(q, pts[g]);
        if (d < best || (d == best && g < best_idx)) best = d, best_idx = g;
      });
      // Points on later rings are at least ring * cell away.
      if (best_idx >= 0 && best <= ring * cell) break;
      if (ring > max_ring + static_cast<int64_t>(std::ceil(
                                 std::max({x0 - q.x, q.x - x1, y0 - q.y, q.y - y1, 0.0}) / cell))) {
        break;
      }
    }
    out[i] = best_idx;
  }
  return out;
}

}  // namespace

std::map<std::string, MetricsReport> per_tissue_report(const AnnotationSet& gt, std::span<const Detection> preds,
                                                       const EvalOptions& opts,
                                                       std::span<const std::string> extra_groups) {
  const double mpp = resolve_mpp(gt, opts);
  auto tag = [](const Annotation& a) { return a.tissue.value_or("untagged"); };
  std::map<std::string, std::pair<std::vector<Annotation>, std::vector<Detection>>> groups;
  for (const auto& a : gt.records) groups[tag(a)].first.push_back(a);
  const auto nearest = nearest_annotation(gt.records, preds);
  for (size_t i = 0; i < preds.size(); ++i) {
    const std::string t = nearest[i] >= 0 ? tag(gt.records[nearest[i]]) : "untagged";
    groups[t].second.push_back(preds[i]);
  }
  std::map<std::string, MetricsReport> out;
  for (const auto& [name, members] : groups) {
    out[name] = evaluate_subset(members.first, members.second, mpp, opts);
  }
  for (const auto& name : extra_groups) {
    if (out.count(name)) continue;
    MetricsReport r = evaluate_subset({}, {}, mpp, opts);
    r.flags.insert(r.flags.begin(), "empty_group");
    out[name] = std::move(r);
  }
  return out;
}

MetricsReport evaluate(const AnnotationSet& gt, std::span<const Detection> preds, const EvalOptions& opts) {
  const double mpp = resolve_mpp(gt, opts);
  MetricsReport r = evaluate_subset(gt.records, preds, mpp, opts);
  const bool tagged = std::any_of(gt.records.begin(), gt.records.end(), [](const Annotation& a) { return a.tissue.has_value(); });
  if (tagged) r.per_tissue = per_tissue_report(gt, filter_by_confidence(preds, opts.threshold), opts);
  return r;
}

SweepResult sweep_threshold(const AnnotationSet& gt, std::span<const Detection> preds, std::span<const double> grid,
                            const EvalOptions& opts) {
  if (grid.empty()) throw UsageError("threshold grid is empty");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0 && grid[i] <= 1)) throw UsageError("threshold grid values must be in [0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw UsageError("threshold grid must be strictly ascending");
  }
  const double mpp = resolve_mpp(gt, opts);
  SweepResult out;
  double best = -1;
  for (double tau : grid) {
    EvalOptions o = opts;
    o.threshold = tau;
    const MetricsReport r = evaluate_subset(gt.records, preds, mpp, o);
    SweepPoint p{tau, r.detection.f1, r.macro_f, 0};
    bool unused = false;
    p.harmonic = ratio(2 * p.f_det * p.macro_f, p.f_det + p.macro_f, unused);
    if (p.harmonic >= best) {
      best = p.harmonic;
      out.best_tau = tau;
    }
    out.curve.push_back(p);
  }
  out.degenerate = best <= 0;
  return out;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& r, std::span<const std::string> names) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["mpp"] = r.mpp;
  j["radius_px"] = r.radius_px;
  j["detection"] = {{"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"precision", r.detection.precision},
                    {"recall", r.detection.recall},
                    {"f1", r.detection.f1}};
  auto classes = nlohmann::ordered_json::array();
  for (size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& k = r.class_counts[c];
    const auto& s = r.per_class[c];
    classes.push_back({{"name", c < names.size() ? names[c] : fmt::format("class{}", c)},
                       {"tp", k.tp},
                       {"tn", k.tn},
                       {"fp", k.fp},
                       {"fn", k.fn},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1}});
  }
  j["classes"] = std::move(classes);
  j["macro_f"] = r.macro_f;
  j["flags"] = r.flags;
  if (!r.per_tissue.empty()) {
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [name, sub] : r.per_tissue) t[name] = report_json(sub, names);
    j["per_tissue"] = std::move(t);
  }
  return j;
}

std::string table_row(const std::string& label, const MetricsReport& r) {
  std::string s = fmt::format("{:<16}{:>7.4f}{:>7.4f}{:>7.4f}", label, r.detection.precision, r.detection.recall,
                              r.detection.f1);
  for (const auto& c : r.per_class) s += fmt::format(" |{:>7.4f}{:>7.4f}{:>7.4f}", c.precision, c.recall, c.f1);
  s += fmt::format(" |{:>8.4f}\n", r.macro_f);
  return s;
}

}  // namespace

std::string report_to_json(const MetricsReport& report, std::span<const std::string> class_names) {
  return report_json(report, class_names).dump(2) + "\n";
}

std::string report_to_table(const MetricsReport& report, std::span<const std::string> class_names) {
  std::string head = fmt::format("{:<16}{:^21}", "", "Detection");
  std::string sub = fmt::format("{:<16}{:>7}{:>7}{:>7}", "", "P", "R", "F");
  for (size_t c = 0; c < report.per_class.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : fmt::format("class{}", c);
    head += fmt::format(" |{:^21}", name.substr(0, 21));
    sub += fmt::format(" |{:>7}{:>7}{:>7}", "P", "R", "F");
  }
  head += fmt::format(" |{:>8}\n", "Macro");
  sub += fmt::format(" |{:>8}\n", "F");
  std::string out = head + sub + table_row("all", report);
  for (const auto& [name, r] : report.per_tissue) out += table_row(name.substr(0, 15), r);
  return out;
}

std::string sweep_to_json(const SweepResult& sweep) {
  nlohmann::ordered_json j;
  j["best_tau"] = sweep.best_tau;
  j["degenerate"] = sweep.degenerate;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : sweep.curve) {
    curve.push_back({{"tau", p.tau}, {"f_det", p.f_det}, {"macro_f", p.macro_f}, {"harmonic", p.harmonic}});
  }
  j["curve"] = std::move(curve);
  return j.dump(2) + "\n";
}

}  // namespace wsinuc
