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

// wsinuc command line: synthetic slides, tissue masks, tile grids, the
// detection pipeline, evaluation and benchmarking.

#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "CLI11.hpp"
#include "json.hpp"

#include "wsinuc/annotations.hpp"
#include "wsinuc/config.hpp"
#include "wsinuc/detections_io.hpp"
#include "wsinuc/errors.hpp"
#include "wsinuc/kernels/kernels.hpp"
#include "wsinuc/metrics.hpp"
#include "wsinuc/pipeline.hpp"
#include "wsinuc/slide_io.hpp"
#include "wsinuc/synthetic.hpp"
#include "wsinuc/tiler.hpp"

namespace {

using namespace wsinuc;

enum class Kind {
  kLiteral,  // number or boolean, passed through as TOML
  kString,
  kList,     // comma separated numbers
  kStrings,  // comma separated strings
  kCommand,  // whitespace separated command line
};

struct Flag {
  std::string key;
  Kind kind;
  std::vector<std::string> values;
};

// Flags bound to config keys; each one given on the command line becomes an override.
class FlagSet {
 public:
  void add(CLI::App* app, const std::string& name, const std::string& key, Kind kind, const std::string& help) {
    flags_.push_back({key, kind, {}});
    auto* opt = app->add_option(name, flags_.back().values, fmt::format("{} [{}]", help, key));
    if (kind == Kind::kList || kind == Kind::kStrings) {
      opt->delimiter(',');
    } else {
      opt->expected(1);
    }
  }

  std::vector<ConfigOverride> overrides() const {
    std::vector<ConfigOverride> out;
    for (const auto& f : flags_) {
      if (f.values.empty()) continue;
      switch (f.kind) {
        case Kind::kLiteral:
          out.emplace_back(f.key, f.values.back());
          break;
        case Kind::kString:
          out.emplace_back(f.key, toml_string(f.values.back()));
          break;
        case Kind::kList:
          out.emplace_back(f.key, "[" + join(f.values, false) + "]");
          break;
        case Kind::kStrings:
          out.emplace_back(f.key, "[" + join(f.values, true) + "]");
          break;
        case Kind::kCommand: {
          std::istringstream words(f.values.back());
          std::vector<std::string> argv;
          for (std::string w; words >> w;) argv.push_back(w);
          out.emplace_back(f.key, "[" + join(argv, true) + "]");
          break;
        }
      }
    }
    return out;
  }

 private:
  static std::string join(const std::vector<std::string>& v, bool quote) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += quote ? toml_string(v[i]) : v[i];
    }
    return s;
  }

  std::deque<Flag> flags_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

SlideSource open_slide(const AppConfig& cfg) {
  if (cfg.input.slide.empty()) throw UsageError("no slide given (--slide / input.slide)");
  std::optional<double> mpp;
  if (cfg.input.mpp > 0) mpp = cfg.input.mpp;
  return SlideSource::open(cfg.input.slide, mpp);
}

int cmd_synth(const AppConfig& cfg) {
  const SyntheticSlide s = generate_synthetic_slide(cfg.synth);
  write_synthetic_slide(s, cfg.synth.mpp, cfg.output.slide, cfg.output.annotations);
  fmt::print("{} {}x{} at {} um/px, {} nuclei -> {}\n", cfg.output.slide, cfg.synth.width, cfg.synth.height,
             cfg.synth.mpp, s.annotations.records.size(), cfg.output.annotations);
  return 0;
}

int cmd_mask(const AppConfig& cfg) {
  const SlideSource slide = open_slide(cfg);
  const auto& p = cfg.pipeline;
  const Thumbnail thumb = thumbnail(slide, p.thumbnail_max_dim);
  const TissueMask mask =
      compute_tissue_mask(thumb.image, thumb.scale, thumb.scale_y, StainMatrix::ruifrok_johnson(), p.tissue);
  std::vector<uint8_t> gray(mask.bits.size());
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  write_png_gray(cfg.output.mask, mask.width, mask.height, gray);
  const double area = std::min(slide.area_mm2(), static_cast<double>(mask.count()) * mask.scale * mask.scale_y *
                                                     slide.mpp() * slide.mpp() / 1e6);
  nlohmann::ordered_json j;
  j["mask"] = cfg.output.mask;
  j["width"] = mask.width;
  j["height"] = mask.height;
  j["scale"] = mask.scale;
  j["scale_y"] = mask.scale_y;
  j["tissue_fraction"] = mask.fraction();
  j["tissue_area_mm2"] = area;
  j["slide_area_mm2"] = slide.area_mm2();
  fmt::print("{}\n", j.dump(2));
  return 0;
}

int cmd_tiles(AppConfig cfg) {
  cfg.pipeline.validate();
  const SlideSource slide = open_slide(cfg);
  const Preprocessed pre = preprocess_slide(cfg.pipeline, slide);
  write_text(cfg.output.tiles, tile_grid_to_json(pre.grid));
  fmt::print("{} of {} tiles kept -> {}\n", pre.grid.tiles.size(), pre.grid.candidate_count, cfg.output.tiles);
  return 0;
}

int cmd_detect(const AppConfig& cfg) {
  const SlideSource slide = open_slide(cfg);
  const auto factory = make_backend_factory(cfg);
  const std::filesystem::path out = cfg.output.detections;
  const auto format =
      cfg.output.format.empty() ? detection_format_for(out) : parse_detection_format(cfg.output.format);
  RunOptions opts;
  opts.partial_path = cfg.output.partial.empty() ? std::filesystem::path(out.string() + ".partial.jsonl")
                                                 : std::filesystem::path(cfg.output.partial);
  opts.config_json = config_to_json(cfg);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  const RunResult r = run_slide(cfg.pipeline, slide, factory, opts);
  write_detections(out, r.detections, format, cfg.pipeline.detector.class_names);
  const std::string manifest = cfg.output.manifest.empty() ? out.string() + ".manifest.json" : cfg.output.manifest;
  write_text(manifest, r.manifest.to_json());
  const auto& t = r.timings;
  fmt::print("{} detections from {} tiles -> {}\n", r.detections.size(), r.manifest.counts.tiles, out.string());
  fmt::print("preprocess {:.3f}s  inference {:.3f}s  postprocess {:.3f}s  total {:.3f}s  {:.3f} mm2/s\n",
             t.preprocess_s, t.inference_s, t.postprocess_s, t.total_s, t.throughput_mm2_per_s);
  return 0;
}

std::pair<AnnotationSet, std::vector<Detection>> eval_inputs(const AppConfig& cfg) {
  if (cfg.input.ground_truth.empty() || cfg.input.predictions.empty()) {
    throw UsageError("eval needs --gt and --pred (input.ground_truth / input.predictions)");
  }
  return {read_annotations_jsonl(cfg.input.ground_truth), read_detections(cfg.input.predictions)};
}

int cmd_eval(const AppConfig& cfg) {
  const auto [gt, preds] = eval_inputs(cfg);
  const auto& names = cfg.pipeline.detector.class_names;
  const MetricsReport r = evaluate(gt, preds, cfg.eval_options());
  if (!cfg.output.report.empty()) write_text(cfg.output.report, report_to_json(r, names));
  fmt::print("{}", report_to_table(r, names));
  if (!r.flags.empty()) fmt::print("flags: {}\n", fmt::join(r.flags, ", "));
  return 0;
}

int cmd_sweep(const AppConfig& cfg) {
  const auto [gt, preds] = eval_inputs(cfg);
  const SweepResult s = sweep_threshold(gt, preds, cfg.eval.sweep_grid, cfg.eval_options());
  const std::string json = sweep_to_json(s);
  if (!cfg.output.sweep.empty()) write_text(cfg.output.sweep, json);
  fmt::print("{}", json);
  return 0;
}

int cmd_bench(const AppConfig& cfg) {
  std::vector<SlideSource> slides;
  std::vector<BenchInput> inputs;
  const auto& b = cfg.bench;
  if (!b.slides.empty()) {
    if (cfg.backend.kind != "process" && b.annotations.size() != b.slides.size()) {
      throw UsageError("bench.annotations must list one file per bench.slides entry");
    }
    for (const auto& path : b.slides) slides.push_back(SlideSource::open(path));
    for (size_t i = 0; i < slides.size(); ++i) {
      AppConfig per = cfg;
      if (cfg.backend.kind != "process") per.backend.annotations = b.annotations[i];
      inputs.push_back({&slides[i], make_backend_factory(per)});
    }
  } else {
    if (cfg.backend.kind == "process") throw UsageError("synthetic bench slides need the oracle or jitter backend");
    for (size_t i = 0; i < b.sizes.size(); ++i) {
      SyntheticSlideSpec spec = cfg.synth;
      spec.width = spec.height = b.sizes[i];
      spec.nucleus_count = static_cast<int>(b.nuclei_per_mpx * b.sizes[i] * static_cast<double>(b.sizes[i]) / 1e6);
      spec.rng_seed = cfg.synth.rng_seed + i;
      SyntheticSlide s = generate_synthetic_slide(spec);
      slides.push_back(SlideSource::from_raster(std::move(s.image), spec.mpp, fmt::format("synthetic-{}", b.sizes[i])));
      auto records = std::make_shared<const std::vector<Annotation>>(std::move(s.annotations.records));
      if (cfg.backend.kind == "oracle") {
        inputs.push_back({nullptr, [records] { return std::make_unique<OracleBackend>(*records); }});
      } else {
        inputs.push_back({nullptr, [records, noise = cfg.backend.noise] {
                            return std::make_unique<JitterBackend>(*records, noise);
                          }});
      }
    }
    for (size_t i = 0; i < inputs.size(); ++i) inputs[i].slide = &slides[i];
  }
  const BenchReport report = run_bench(cfg.pipeline, inputs);
  write_text(b.csv, report.to_csv());
  write_text(b.fit, report.fit_json());
  fmt::print("{}", report.to_csv());
  fmt::print("total_s = {:.6g} * area_mm2 + {:.6g}\n", report.total_fit.slope, report.total_fit.intercept);
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Whole-slide nuclei detection pipeline", "wsinuc"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", WSINUC_VERSION);

  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  FlagSet flags;
  app.add_option("-c,--config", config_path, "TOML configuration file");
  app.add_option("--set", sets, "Override any config key: key=value (TOML value)");
  flags.add(&app, "--seed", "seed", Kind::kLiteral, "Seed for all randomness");
  flags.add(&app, "--isa", "isa", Kind::kString, "Kernel variant: auto, scalar, avx2");
  flags.add(&app, "--log-level", "log_level", Kind::kString, "trace, debug, info, warn, error, off");

  auto tiling = [&](CLI::App* sub) {
    flags.add(sub, "--tile-size", "tiling.tile_size", Kind::kLiteral, "Tile side in working pixels");
    flags.add(sub, "--tile-overlap", "tiling.tile_overlap", Kind::kLiteral, "Tile overlap");
    flags.add(sub, "--window-size", "tiling.window_size", Kind::kLiteral, "Window side");
    flags.add(sub, "--window-overlap", "tiling.window_overlap", Kind::kLiteral, "Window overlap");
    flags.add(sub, "--mpp-target", "tiling.mpp_target", Kind::kLiteral, "Working resolution (0 = native)");
    flags.add(sub, "--min-tissue-fraction", "tiling.min_tissue_fraction", Kind::kLiteral, "Tile tissue filter");
    flags.add(sub, "--thumbnail-max-dim", "tissue.thumbnail_max_dim", Kind::kLiteral, "Thumbnail size for the mask");
    flags.add(sub, "--tissue-thresholds", "tissue.thresholds", Kind::kList, "H,E,D density thresholds");
  };
  auto slide_input = [&](CLI::App* sub) {
    flags.add(sub, "--slide", "input.slide", Kind::kString, "Slide (pyramidal TIFF or PNG)");
    flags.add(sub, "--mpp", "input.mpp", Kind::kLiteral, "Override the slide resolution");
  };
  auto detector = [&](CLI::App* sub) {
    flags.add(sub, "--backend", "detector.backend", Kind::kString, "oracle, jitter or process");
    flags.add(sub, "--annotations", "detector.annotations", Kind::kString, "Annotations for oracle/jitter");
    flags.add(sub, "--adapter", "detector.adapter_command", Kind::kCommand, "Adapter command line");
    flags.add(sub, "--workers", "pipeline.worker_count", Kind::kLiteral, "Tile workers");
    flags.add(sub, "--confidence-threshold", "detector.confidence_threshold", Kind::kLiteral, "Score threshold");
    flags.add(sub, "--top-k", "detector.top_k", Kind::kLiteral, "Detections kept per window");
    flags.add(sub, "--max-batch", "detector.max_batch", Kind::kLiteral, "Windows per backend call");
    flags.add(sub, "--drop-prob", "detector.noise.drop_prob", Kind::kLiteral, "Jitter backend: drop probability");
    flags.add(sub, "--jitter-sigma", "detector.noise.jitter_sigma", Kind::kLiteral, "Jitter backend: sigma (px)");
    flags.add(sub, "--flip-prob", "detector.noise.class_flip_prob", Kind::kLiteral, "Jitter backend: class flips");
    flags.add(sub, "--fp-rate", "detector.noise.false_positive_rate", Kind::kLiteral,
              "Jitter backend: spurious detections per window");
  };
  auto eval_flags = [&](CLI::App* sub) {
    flags.add(sub, "--gt", "input.ground_truth", Kind::kString, "Ground-truth annotations (JSONL)");
    flags.add(sub, "--pred", "input.predictions", Kind::kString, "Predictions (jsonl, csv or geojson)");
    flags.add(sub, "--mpp", "eval.mpp", Kind::kLiteral, "Resolution of the coordinates");
    flags.add(sub, "--radius-um", "eval.radius_um", Kind::kLiteral, "Matching radius in micrometres");
    flags.add(sub, "--matcher", "eval.matcher", Kind::kString, "optimal or greedy");
    flags.add(sub, "--restricted", "eval.restricted_class_errors", Kind::kLiteral,
              "Per-class detection errors in the class metrics (true/false)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic slide with ground truth");
  flags.add(synth, "-o,--out", "output.slide", Kind::kString, "Slide path (.tif/.tiff or .png)");
  flags.add(synth, "--annotations-out", "output.annotations", Kind::kString, "Annotation JSONL path");
  flags.add(synth, "--width", "synth.width", Kind::kLiteral, "Width in pixels");
  flags.add(synth, "--height", "synth.height", Kind::kLiteral, "Height in pixels");
  flags.add(synth, "--mpp", "synth.mpp", Kind::kLiteral, "Resolution");
  flags.add(synth, "--nuclei", "synth.nucleus_count", Kind::kLiteral, "Number of nuclei");
  flags.add(synth, "--diameter-min", "synth.diameter_min", Kind::kLiteral, "Smallest nucleus diameter (px)");
  flags.add(synth, "--diameter-max", "synth.diameter_max", Kind::kLiteral, "Largest nucleus diameter (px)");
  flags.add(synth, "--inset", "synth.tissue_inset", Kind::kLiteral, "White border (px)");
  flags.add(synth, "--blank", "synth.blank", Kind::kLiteral, "No tissue background (true/false)");
  flags.add(synth, "--tissues", "synth.tissue_names", Kind::kStrings, "Tissue tags by vertical band");

  auto* mask = app.add_subcommand("mask", "Tissue mask PNG and statistics");
  slide_input(mask);
  tiling(mask);
  flags.add(mask, "-o,--out", "output.mask", Kind::kString, "Mask PNG path");

  auto* tiles = app.add_subcommand("tiles", "Tile grid as JSON");
  slide_input(tiles);
  tiling(tiles);
  flags.add(tiles, "-o,--out", "output.tiles", Kind::kString, "tiles.json path");

  auto* detect = app.add_subcommand("detect", "Run the pipeline on a slide");
  slide_input(detect);
  tiling(detect);
  detector(detect);
  flags.add(detect, "-o,--out", "output.detections", Kind::kString, "Detections path");
  flags.add(detect, "--format", "output.format", Kind::kString, "jsonl, csv or geojson");
  flags.add(detect, "--manifest", "output.manifest", Kind::kString, "Run manifest path");
  flags.add(detect, "--partial", "output.partial", Kind::kString, "Partial results path on failure");

  auto* eval = app.add_subcommand("eval", "Detection and classification metrics");
  eval_flags(eval);
  flags.add(eval, "--threshold", "eval.threshold", Kind::kLiteral, "Confidence threshold");
  flags.add(eval, "-o,--out", "output.report", Kind::kString, "Report JSON path");

  auto* sweep = app.add_subcommand("sweep-threshold", "Pick the confidence threshold");
  eval_flags(sweep);
  flags.add(sweep, "--grid", "eval.sweep_grid", Kind::kList, "Ascending thresholds");
  flags.add(sweep, "-o,--out", "output.sweep", Kind::kString, "Sweep JSON path");

  auto* bench = app.add_subcommand("bench", "Stage timings against slide area");
  tiling(bench);
  detector(bench);
  flags.add(bench, "--sizes", "bench.sizes", Kind::kList, "Synthetic slide sides");
  flags.add(bench, "--nuclei-per-mpx", "bench.nuclei_per_mpx", Kind::kLiteral, "Synthetic nucleus density");
  flags.add(bench, "--slides", "bench.slides", Kind::kStrings, "Slide files instead of synthetic slides");
  flags.add(bench, "--slide-annotations", "bench.annotations", Kind::kStrings, "Annotations per slide");
  flags.add(bench, "--csv", "bench.csv", Kind::kString, "Timing CSV path");
  flags.add(bench, "--fit", "bench.fit", Kind::kString, "Line-fit JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  std::vector<ConfigOverride> overrides;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(fmt::format("--set expects key=value, got '{}'", s));
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (auto& o : flags.overrides()) overrides.push_back(std::move(o));
  std::optional<std::filesystem::path> config_file;
  if (config_path) config_file = *config_path;
  const AppConfig cfg = load_config(config_file, overrides);

  spdlog::set_level(spdlog::level::from_str(cfg.log_level));
  if (cfg.isa != "auto") kernels::select(kernels::parse_isa(cfg.isa));

  if (synth->parsed()) return cmd_synth(cfg);
  if (mask->parsed()) return cmd_mask(cfg);
  if (tiles->parsed()) return cmd_tiles(cfg);
  if (detect->parsed()) return cmd_detect(cfg);
  if (eval->parsed()) return cmd_eval(cfg);
  if (sweep->parsed()) return cmd_sweep(cfg);
  if (bench->parsed()) return cmd_bench(cfg);
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wsinuc::Error& e) {
    fmt::print(stderr, "wsinuc: {}\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "wsinuc: {}\n", e.what());
    return static_cast<int>(wsinuc::ExitCode::kIo);
  } catch (const std::exception& e) {
    fmt::print(stderr, "wsinuc: {}\n", e.what());
    return static_cast<int>(wsinuc::ExitCode::kUsage);
  }
}
