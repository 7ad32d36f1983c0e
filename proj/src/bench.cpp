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

#include <fmt/format.h>
#include "json.hpp"

#include "wsinuc/errors.hpp"
#include "wsinuc/pipeline.hpp"

namespace wsinuc {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw UsageError("line fit needs equally many x and y values (>= 1)");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx > 0) return {sxy / sxx, my - sxy / sxx * mx};
  double xx = 0, xy = 0;
  for (size_t i = 0; i < x.size(); ++i) xx += x[i] * x[i], xy += x[i] * y[i];
  return {xx > 0 ? xy / xx : 0.0, 0.0};
}

BenchReport run_bench(const PipelineConfig& cfg, const std::vector<BenchInput>& inputs) {
  if (inputs.empty()) throw UsageError("bench needs at least one slide");
  BenchReport report;
  for (const auto& in : inputs) {
    if (!in.slide) throw UsageError("bench input without a slide");
    RunResult r = run_slide(cfg, *in.slide, in.make_backend);
    report.rows.push_back({in.slide->name(), r.timings, r.detections.size()});
  }
  std::vector<double> area, total, inference, post;
  for (const auto& row : report.rows) {
    area.push_back(row.timings.tissue_area_mm2);
    total.push_back(row.timings.total_s);
    inference.push_back(row.timings.inference_s);
    post.push_back(row.timings.postprocess_s);
  }
  report.total_fit = fit_line(area, total);
  report.inference_fit = fit_line(area, inference);
  report.postprocess_fit = fit_line(area, post);
  return report;
}

std::string BenchReport::to_csv() const {
  std::string out = "slide,area_mm2,preprocess_s,inference_s,postprocess_s,total_s,throughput_mm2_per_s,detections\n";
  for (const auto& r : rows) {
    const auto& t = r.timings;
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.slide, t.tissue_area_mm2, t.preprocess_s,
                       t.inference_s, t.postprocess_s, t.total_s, t.throughput_mm2_per_s, r.detections);
  }
  return out;
}

std::string BenchReport::fit_json() const {
  auto fit = [](const LineFit& f) { return nlohmann::ordered_json{{"slope_s_per_mm2", f.slope}, {"intercept_s", f.intercept}}; };
  nlohmann::ordered_json j;
  j["slides"] = rows.size();
  j["total_s"] = fit(total_fit);
  j["inference_s"] = fit(inference_fit);
  j["postprocess_s"] = fit(postprocess_fit);
  return j.dump(2) + "\n";
}

}  // namespace wsinuc
