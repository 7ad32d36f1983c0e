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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "wsinuc/annotations.hpp"
#include "wsinuc/config.hpp"
#include "wsinuc/detections_io.hpp"
#include "wsinuc/errors.hpp"

using namespace wsinuc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wsinuc_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<Detection> kHand{
    {10.5, 20.25, 12, 14, 0, 0.9}, {100, 3.125, 8, 8, 2, 1.0}, {7, 300.75, 16, 9.5, 4, 0.5}};

fs::path write_toml(const std::string& text) {
  const fs::path p = scratch("cfg.toml");
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("detections golden files") {
  const auto names = default_class_names();
  for (auto [ext, fmt] : {std::pair{"jsonl", DetectionFormat::kJsonl}, {"csv", DetectionFormat::kCsv},
                          {"geojson", DetectionFormat::kGeoJson}}) {
    CAPTURE(ext);
    const fs::path golden = fs::path(WSINUC_GOLDEN_DIR) / (std::string("detections.") + ext);
    CHECK(format_detections(kHand, fmt, names) == slurp(golden));
    CHECK(read_detections(golden) == kHand);
    CHECK(detection_format_for(golden) == fmt);
    CHECK(parse_detection_format(ext) == fmt);
  }
}

TEST_CASE("empty detection files") {
  const auto names = default_class_names();
  CHECK(format_detections({}, DetectionFormat::kJsonl, names).empty());
  CHECK(format_detections({}, DetectionFormat::kGeoJson, names) == "{\"type\":\"FeatureCollection\",\"features\":[]}\n");
  CHECK(format_detections({}, DetectionFormat::kCsv, names) == "cx,cy,w,h,class,class_name,score\n");
  for (const char* name : {"empty.jsonl", "empty.csv", "empty.geojson"}) {
    const fs::path p = scratch(name);
    write_detections(p, {}, detection_format_for(p), names);
    CHECK(read_detections(p).empty());
  }
}

TEST_CASE("detection round trip at full precision") {
  std::vector<Detection> dets;
  for (int i = 0; i < 50; ++i) dets.push_back({i * 17.125, i * 3.5 + 0.375, 8, 9.25, i % 5, (i % 9) / 8.0});
  const fs::path p = scratch("rt.jsonl");
  write_detections(p, dets, DetectionFormat::kJsonl, default_class_names());
  CHECK(read_detections(p) == dets);
}

TEST_CASE("detection io errors") {
  CHECK_THROWS_AS(parse_detection_format("xml"), UsageError);
  CHECK_THROWS_AS(detection_format_for("a.txt"), UsageError);
  CHECK_THROWS_AS(read_detections(scratch("missing.jsonl")), IoError);
  const fs::path bad = scratch("bad.jsonl");
  std::ofstream(bad) << "{\"cx\":1}\n";
  CHECK_THROWS_AS(read_detections(bad), IoError);
  CHECK_THROWS_AS(write_detections("/nonexistent-dir/x.jsonl", kHand, DetectionFormat::kJsonl, {}), IoError);
}

TEST_CASE("annotation round trip") {
  AnnotationSet s;
  s.mpp = 0.25;
  s.records = {{1.5, 2.25, 10, 12, 3, std::string("colon")}, {100.125, 0, 6, 6, 0, {}}};
  const fs::path p = scratch("ann.jsonl");
  write_annotations_jsonl(p, s);
  const AnnotationSet back = read_annotations_jsonl(p);
  CHECK(back.records == s.records);
  const auto dets = to_detections(s);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].cy == 0);
  CHECK(dets[0].score == 1.0);
  CHECK_THROWS_AS(read_annotations_jsonl(scratch("nope.jsonl")), IoError);
}

TEST_CASE("config defaults") {
  const AppConfig c = load_config(std::nullopt, {});
  CHECK(c.pipeline.tile_size == 1024);
  CHECK(c.pipeline.tile_overlap == 64);
  CHECK(c.pipeline.window_size == 256);
  CHECK(c.pipeline.window_overlap == 64);
  CHECK(c.pipeline.detector.num_queries == 900);
  CHECK(c.pipeline.detector.top_k == 300);
  CHECK(c.eval.radius_um == 3.0);
  CHECK(c.eval.sweep_grid.size() == 21);
  CHECK(c.backend.kind == "oracle");
  CHECK(c.synth.rng_seed != c.backend.noise.rng_seed);
}

TEST_CASE("config file and overrides") {
  const fs::path p = write_toml(R"(
seed = 42
[tiling]
tile_size = 512
mpp_target = 0.5
[detector]
classes = ["a", "b"]
[detector.noise]
jitter_sigma = 1.5
score_range_true = [0.6, 0.9]
[eval]
matcher = "greedy"
)");
  const AppConfig c = load_config(p, {});
  CHECK(c.seed == 42);
  CHECK(c.pipeline.tile_size == 512);
  CHECK(c.pipeline.mpp_target == 0.5);
  CHECK(c.pipeline.detector.class_names == std::vector<std::string>{"a", "b"});
  CHECK(c.backend.noise.jitter_sigma == 1.5);
  CHECK(c.backend.noise.score_range_true == std::pair{0.6, 0.9});
  CHECK(c.eval_options().mode == MatchMode::kGreedy);

  const AppConfig o = load_config(p, {{"tiling.tile_size", "1536"}, {"seed", "7"}, {"output.format", "csv"},
                                      {"detector.backend", toml_string("jitter")}});
  CHECK(o.pipeline.tile_size == 1536);
  CHECK(o.output.format == "csv");
  CHECK(o.backend.kind == "jitter");
  CHECK(o.pipeline.mpp_target == 0.5);
  // The seed drives every derived stream.
  CHECK(o.synth.rng_seed != c.synth.rng_seed);
  CHECK(load_config(p, {{"seed", "7"}}).synth.rng_seed == o.synth.rng_seed);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(load_config(write_toml("[tiling]\ntile_sise = 3\n"), {}), UsageError);
  CHECK_THROWS_AS(load_config(write_toml("bogus = 1\n"), {}), UsageError);
  CHECK_THROWS_AS(load_config(write_toml("[tiling]\ntile_size = \"big\"\n"), {}), UsageError);
  CHECK_THROWS_AS(load_config(write_toml("[tiling\n"), {}), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"tiling.nothing", "1"}}), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"detector.backend", "magic"}}), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"tissue.thresholds", "[1, 2]"}}), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"detector.noise.drop_prob", "2.0"}}), UsageError);
  CHECK_THROWS_AS(load_config(scratch("missing.toml"), {}), IoError);
  AppConfig c = load_config(std::nullopt, {});
  c.backend.kind = "process";
  CHECK_THROWS_AS(make_backend_factory(c), UsageError);
  c.backend.kind = "oracle";
  CHECK_THROWS_AS(make_backend_factory(c), UsageError);
}

TEST_CASE("toml strings and config json") {
  const std::string tricky = "a\"b\\c'd";
  CHECK(load_config(std::nullopt, {{"input.slide", toml_string(tricky)}}).input.slide == tricky);
  CHECK(load_config(std::nullopt, {{"input.slide", toml_string("a\"b\\c")}}).input.slide == "a\"b\\c");
  const AppConfig c = load_config(std::nullopt, {{"input.slide", toml_string("x y.tif")}});
  CHECK(c.input.slide == "x y.tif");
  const auto j = nlohmann::json::parse(config_to_json(c));
  CHECK(j.is_object());
  CHECK(j.dump().find("x y.tif") != std::string::npos);
}

TEST_CASE("shipped default.toml matches the built-in defaults") {
  const AppConfig shipped = load_config(std::filesystem::path(WSINUC_CONFIG_DIR) / "default.toml", {});
  const AppConfig builtin = load_config(std::nullopt, {});
  CHECK(config_to_json(shipped) == config_to_json(builtin));
  CHECK(shipped.synth.class_weights == builtin.synth.class_weights);
  CHECK(shipped.bench.sizes == builtin.bench.sizes);
  CHECK(shipped.eval.sweep_grid == builtin.eval.sweep_grid);
  CHECK(shipped.output.detections == builtin.output.detections);
}
