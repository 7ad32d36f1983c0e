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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// below; the exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "wsinuc/annotations.hpp"
#include "wsinuc/detections_io.hpp"
#include "wsinuc/matchloss.hpp"
#include "wsinuc/metrics.hpp"
#include "wsinuc/pipeline.hpp"
#include "wsinuc/stainlab.hpp"
#include "wsinuc/synthetic.hpp"

using namespace wsinuc;

namespace {

constexpr double kOracleBudgetS = 60.0;
constexpr double kExactTol = 1e-12;
constexpr int kRoundTripLevels = 2;
constexpr double kPostprocessExponentMax = 1.2;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures inside a criterion.
struct Checker {
  int failures = 0;
  std::string first;
  void operator()(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) first = what;
  }
  Outcome done(std::string summary) const {
    if (failures == 0) return {true, std::move(summary)};
    return {false, fmt::format("{} failure(s), first: {}", failures, first)};
  }
};

int report(const char* name, const std::function<Outcome()>& fn) {
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

SyntheticSlide synth(int side, int nuclei, uint64_t seed) {
  SyntheticSlideSpec spec;
  spec.width = side;
  spec.height = side;
  spec.nucleus_count = nuclei;
  spec.diameter_min = 8;
  spec.diameter_max = 40;
  spec.rng_seed = seed;
  spec.tissue_names = {"breast", "colon"};
  return generate_synthetic_slide(spec);
}

BackendFactory oracle(const AnnotationSet& a) {
  return [records = a.records] { return std::make_unique<OracleBackend>(records); };
}

PipelineConfig base_config() {
  PipelineConfig c;
  c.worker_count = 1;
  return c;
}

// ---- oracles ---------------------------------------------------------------

double brute_force_assignment(const CostMatrix& c) {
  const bool t = c.rows > c.cols;
  const size_t small = t ? c.cols : c.rows, big = t ? c.rows : c.cols;
  if (small == 0) return 0;
  std::vector<size_t> perm(big);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0;
    for (size_t i = 0; i < small; ++i) s += t ? c.at(perm[i], i) : c.at(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Maximum matching cardinality within `radius`, by DP over prediction subsets.
int brute_force_matching(const std::vector<Point2>& gt, const std::vector<Point2>& pred, double radius) {
  const size_t full = size_t{1} << pred.size();
  std::vector<int> best(full, -1);
  best[0] = 0;
  for (const auto& g : gt) {
    std::vector<int> next = best;
    for (size_t mask = 0; mask < full; ++mask) {
      if (best[mask] < 0) continue;
      for (size_t j = 0; j < pred.size(); ++j) {
        if ((mask >> j) & 1) continue;
        if (std::hypot(g.x - pred[j].x, g.y - pred[j].y) > radius) continue;
        next[mask | (size_t{1} << j)] = std::max(next[mask | (size_t{1} << j)], best[mask] + 1);
      }
    }
    best = std::move(next);
  }
  return *std::max_element(best.begin(), best.end());
}

// ---- criteria ----------------------------------------------------------------

Outcome oracle_end_to_end() {
  struct Case {
    int side;
    int nuclei;
  };
  const Case cases[] = {{2048, 1000}, {3072, 2500}, {4096, 4000}, {6144, 7000}, {8192, 10000}};
  Checker check;
  double pipeline_s = 0;
  const auto t0 = Clock::now();
  uint64_t seed = 100;
  for (const auto& c : cases) {
    const SyntheticSlide s = synth(c.side, c.nuclei, seed++);
    double max_d = 0;
    for (const auto& a : s.annotations.records) max_d = std::max({max_d, a.w, a.h});
    check(max_d < 64, fmt::format("{}px slide has a nucleus of {} px", c.side, max_d));
    const SlideSource slide = SlideSource::from_raster(s.image, 0.25, fmt::format("synthetic-{}", c.side));
    const auto t = Clock::now();
    const RunResult r = run_slide(base_config(), slide, oracle(s.annotations));
    pipeline_s += since(t);
    check(r.detections == to_detections(s.annotations), fmt::format("{}px: detections differ from annotations", c.side));
    EvalOptions opts;
    const MetricsReport m = evaluate(s.annotations, r.detections, opts);
    check(m.detection.f1 == 1.0, fmt::format("{}px: F_det = {}", c.side, m.detection.f1));
    check(m.macro_f == 1.0, fmt::format("{}px: macro-F = {}", c.side, m.macro_f));
  }
  const double total = since(t0);
  check(total < kOracleBudgetS, fmt::format("runtime {:.1f} s >= {} s", total, kOracleBudgetS));
  return check.done(fmt::format("5 slides 2048..8192 px, 1e3..1e4 nuclei, exact output, F_det = macro-F = 1; "
                                "{:.1f} s total ({:.1f} s in the pipeline)",
                                total, pipeline_s));
}

Outcome partition_invariance() {
  const SyntheticSlide s = synth(4096, 6000, 7);
  const SlideSource slide = SlideSource::from_raster(s.image, 0.25);
  Checker check;
  std::vector<std::vector<Detection>> runs;
  for (int tile : {512, 1024, 1536}) {
    PipelineConfig c = base_config();
    c.tile_size = tile;
    c.tile_overlap = c.window_overlap = 64;
    runs.push_back(run_slide(c, slide, oracle(s.annotations)).detections);
  }
  check(runs[0] == runs[1], "512 vs 1024 differ");
  check(runs[1] == runs[2], "1024 vs 1536 differ");
  return check.done(fmt::format("tile sizes 512/1024/1536 at overlap 64 give identical sets of {} detections",
                                runs[0].size()));
}

Outcome assignment_optimality() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> side(1, 7), ints(0, 20), fine(0, 1 << 14);
  Checker check;
  for (int t = 0; t < 200; ++t) {
    CostMatrix c(side(rng), side(rng));
    // Dyadic values keep every sum exact, so the comparison can be exact.
    for (auto& v : c.data) v = t % 2 ? ints(rng) : fine(rng) / 1024.0;
    const Assignment a = assign(c);
    const double oracle_cost = brute_force_assignment(c);
    check(a.total_cost == oracle_cost, fmt::format("matrix {} ({}x{}): {} vs {}", t, c.rows, c.cols, a.total_cost,
                                                   oracle_cost));
    check(a.pairs.size() == std::min(c.rows, c.cols), fmt::format("matrix {}: wrong size", t));
  }
  return check.done("200 random matrices up to 7x7 match the exhaustive-permutation optimum exactly");
}

Outcome matching_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> count(0, 10);
  Checker check;
  for (int t = 0; t < 100; ++t) {
    std::uniform_real_distribution<double> u(0, 48);
    std::vector<Point2> gt(count(rng)), pred(count(rng));
    for (auto& p : gt) p = {u(rng), u(rng)};
    for (auto& p : pred) p = {u(rng), u(rng)};
    const MatchResult a = match_centroids(gt, pred, 3.0, 0.25);
    const int expect = brute_force_matching(gt, pred, 12.0);
    check(a.tp() == expect, fmt::format("instance {} at 0.25: {} vs {}", t, a.tp(), expect));
    for (const auto& p : a.pairs) check(p.distance <= 12.0, "pair beyond 12 px");
    // Same physical layout at 0.5 um/px: coordinates halved, radius 6 px.
    std::vector<Point2> gh = gt, ph = pred;
    for (auto& p : gh) p = {p.x / 2, p.y / 2};
    for (auto& p : ph) p = {p.x / 2, p.y / 2};
    const MatchResult b = match_centroids(gh, ph, 3.0, 0.5);
    check(b.tp() == brute_force_matching(gh, ph, 6.0), fmt::format("instance {} at 0.5", t));
    check(b.tp() == a.tp(), fmt::format("instance {}: 12 px and 6 px criteria disagree", t));
  }
  const std::vector<Point2> g{{100, 100}};
  const std::vector<Point2> at12{{112, 100}}, past12{{112.01, 100}}, at6{{106, 100}}, past6{{106.01, 100}};
  check(match_centroids(g, at12, 3.0, 0.25).tp() == 1, "12 px not matched at 0.25");
  check(match_centroids(g, past12, 3.0, 0.25).tp() == 0, "12.01 px matched at 0.25");
  check(match_centroids(g, at6, 3.0, 0.5).tp() == 1, "6 px not matched at 0.5");
  check(match_centroids(g, past6, 3.0, 0.5).tp() == 0, "6.01 px matched at 0.5");
  return check.done("100 instances (<= 10 points/side) reach the brute-force maximum at 12 px / 0.25 and 6 px / 0.5");
}

Outcome metric_identities() {
  Checker check;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n(0, 30);
  for (int t = 0; t < 500; ++t) {
    MatchResult m;
    const int tp = n(rng), fp = n(rng), fn = n(rng);
    for (int i = 0; i < tp; ++i) m.pairs.push_back({i, i, 0});
    for (int i = 0; i < fp; ++i) m.unmatched_pred.push_back(tp + i);
    for (int i = 0; i < fn; ++i) m.unmatched_gt.push_back(tp + i);
    const Scores s = detection_metrics(m);
    if (s.precision + s.recall > 0) {
      check(std::abs(s.f1 - 2 * s.precision * s.recall / (s.precision + s.recall)) < kExactTol,
            fmt::format("harmonic identity fails at tp={} fp={} fn={}", tp, fp, fn));
    }
  }
  MatchResult m;
  m.pairs = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}};
  const std::vector<int> gl{0, 0, 1}, pl{0, 1, 1};
  const auto counts = classification_counts(m, gl, pl, 2);
  const auto s = classification_metrics(counts, m);
  check(std::abs(s[0].precision - 1.0) < kExactTol, fmt::format("P_A = {}", s[0].precision));
  check(std::abs(s[0].recall - 0.5) < kExactTol, fmt::format("R_A = {}", s[0].recall));
  check(std::abs(s[0].f1 - 2.0 / 3.0) < kExactTol, fmt::format("F_A = {}", s[0].f1));

  MatchResult empty;
  empty.unmatched_gt = {0};
  const Scores z = detection_metrics(empty);
  check(z.precision == 0 && z.f1 == 0 && z.zero_division, "0/0 detection case not 0 with flag");
  const auto zc = classification_metrics(classification_counts(MatchResult{}, {}, {}, 2), MatchResult{});
  check(zc[0].f1 == 0 && zc[0].zero_division, "0/0 class case not 0 with flag");
  const MetricsReport r = evaluate({{{5, 5, 8, 8, 0, {}}}, 0.25}, {}, EvalOptions{});
  check(!r.flags.empty(), "report without predictions carries no flag");
  return check.done("F_det harmonic identity on 500 cases; P_A=1, R_A=0.5, F_A=2/3 within 1e-12; 0/0 -> 0 flagged");
}

Outcome giou_focal() {
  Checker check;
  check(std::abs(giou(BoxXYXY{0, 0, 2, 2}, BoxXYXY{1, 1, 3, 3}) + 5.0 / 63.0) < kExactTol, "GIoU -5/63");
  check(std::abs(giou(BoxXYXY{0, 0, 1, 1}, BoxXYXY{2, 0, 3, 1}) + 1.0 / 3.0) < kExactTol, "GIoU -1/3");
  check(std::abs(giou(BoxXYXY{0.2, 0.3, 0.7, 0.9}, BoxXYXY{0.2, 0.3, 0.7, 0.9}) - 1.0) < kExactTol, "GIoU 1");
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 1000; ++t) {
    const double ax = u(rng), ay = u(rng), bx = u(rng), by = u(rng);
    const BoxXYXY a{ax, ay, ax + 0.01 + u(rng), ay + 0.01 + u(rng)}, b{bx, by, bx + 0.01 + u(rng), by + 0.01 + u(rng)};
    check(giou(a, b) <= iou(a, b), fmt::format("GIoU > IoU at pair {}", t));
  }
  const std::vector<double> half{0.5, 0.5}, p9{0.9, 0.1}, one{1.0, 0.0};
  check(std::abs(focal_loss(half, 0, 1.0, 0.0).value - std::log(2.0)) < kExactTol, "focal ln 2");
  check(std::abs(focal_loss(p9, 0, 0.25, 2.0).value - 0.25 * 0.01 * -std::log(0.9)) < kExactTol, "focal 2.634e-4");
  check(focal_loss(one, 0, 0.25, 2.0).value == 0.0, "focal at p_t = 1");
  return check.done("GIoU -5/63, -1/3, 1 within 1e-12; GIoU <= IoU on 1000 pairs; focal closed forms within 1e-12");
}

Outcome stain_math() {
  Checker check;
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> ch(8, 247);
  std::vector<uint8_t> px(100 * 100 * 3);
  for (auto& b : px) b = static_cast<uint8_t>(ch(rng));
  const RasterImage img(100, 100, px);
  const RasterImage rt = hed_to_rgb(rgb_to_hed(img, m), m);
  int worst = 0;
  for (size_t i = 0; i < px.size(); ++i) worst = std::max(worst, std::abs(int(rt.pixels()[i]) - int(px[i])));
  check(worst <= kRoundTripLevels, fmt::format("round-trip error {} levels", worst));
  std::mt19937_64 aug(1);
  check(hed_augment(img, 0.0, 0.0, aug, m) == rt, "hed_augment(0, 0) differs from the round trip");
  return check.done(fmt::format("10^4 pixels in [8, 247]: worst round-trip error {}/255; alpha = beta = 0 is the round trip",
                                worst));
}

Outcome determinism_scaling() {
  Checker check;
  const SyntheticSlide s = synth(4096, 5000, 21);
  const SlideSource slide = SlideSource::from_raster(s.image, 0.25);
  const auto names = default_class_names();
  PipelineConfig one = base_config(), four = base_config();
  four.worker_count = 4;
  const std::string a = format_detections(run_slide(one, slide, oracle(s.annotations)).detections,
                                          DetectionFormat::kJsonl, names);
  const std::string b = format_detections(run_slide(four, slide, oracle(s.annotations)).detections,
                                          DetectionFormat::kJsonl, names);
  check(a == b, "worker_count 1 and 4 outputs differ");

  // Post-processing time against detection count on a fixed 16384^2 grid.
  const TileGrid grid = enumerate_tiles(nullptr, {16384, 16384}, 1024, 64, 0);
  std::vector<double> lx, ly;
  for (int n : {1000, 10000, 100000}) {
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> u(0, 1024);
    std::vector<TileRecord> records(grid.tiles.size());
    for (size_t i = 0; i < records.size(); ++i) records[i].tile_index = i;
    for (int k = 0; k < n; ++k) {
      auto& r = records[rng() % records.size()];
      r.detections.push_back({u(rng), u(rng), 10, 10, k % 5, 1.0});
    }
    double best = INFINITY;
    for (int rep = 0; rep < 7; ++rep) {
      auto copy = records;
      const auto t = Clock::now();
      const auto merged = merge_tile_records(grid, std::move(copy), 1.0);
      best = std::min(best, since(t));
      check(!merged.empty(), "empty merge");
    }
    lx.push_back(std::log(n));
    ly.push_back(std::log(best));
  }
  const double exponent = fit_line(lx, ly).slope;
  check(exponent <= kPostprocessExponentMax, fmt::format("post-processing exponent {:.3f}", exponent));

  const SyntheticSlide small = synth(2048, 1000, 22);
  const SlideSource sa = SlideSource::from_raster(small.image, 0.25, "a");
  const BenchReport bench = run_bench(base_config(), {{&sa, oracle(small.annotations)}});
  const std::string csv = bench.to_csv();
  const std::string header = csv.substr(0, csv.find('\n'));
  check(header.find("inference_s") != std::string::npos && header.find("postprocess_s") != std::string::npos,
        "bench CSV lacks the inference / post-processing split: " + header);
  return check.done(fmt::format("worker_count 1 and 4 byte-identical; post-processing exponent {:.3f} over 1e3..1e5 "
                                "detections; bench CSV: {}",
                                exponent, header));
}

}  // namespace

int main() {
  int failed = 0;
  failed += report("oracle-end-to-end", oracle_end_to_end);
  failed += report("partition-invariance", partition_invariance);
  failed += report("assignment-optimality", assignment_optimality);
  failed += report("matching-oracle", matching_oracle);
  failed += report("metric-identities", metric_identities);
  failed += report("giou-focal", giou_focal);
  failed += report("stain-math", stain_math);
  failed += report("determinism-scaling", determinism_scaling);
  std::printf("%d of 8 criteria failed\n", failed);
  return failed;
}
