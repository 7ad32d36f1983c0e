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

#include "wsinuc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"
#include "toml.hpp"

#include "wsinuc/adapter.hpp"
#include "wsinuc/errors.hpp"

namespace wsinuc {
namespace {

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts) {
    if (p.empty()) throw UsageError(fmt::format("malformed config key '{}'", key));
  }
  return parts;
}

void apply_override(toml::table& root, const ConfigOverride& o) {
  const auto parts = split_key(o.first);
  toml::table* t = &root;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    auto* node = t->get(parts[i]);
    if (!node) {
      t->insert(parts[i], toml::table{});
      node = t->get(parts[i]);
    }
    t = node->as_table();
    if (!t) throw UsageError(fmt::format("config key '{}' is not a table", parts[i]));
  }
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + o.second);
  } catch (const toml::parse_error&) {
    // Bare words are taken as strings.
    parsed.insert("v", o.second);
  }
  t->insert_or_assign(parts.back(), *parsed.get("v"));
}

// Typed access that remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const toml::table& root) : root_(root) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    const toml::node* n = find(key);
    if (!n) return;
    consumed_.insert(key);
    if constexpr (std::is_same_v<T, bool>) {
      out = require<bool>(*n, key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = require<std::string>(*n, key, "a string");
    } else if constexpr (std::is_integral_v<T>) {
      const int64_t v = require<int64_t>(*n, key, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) throw UsageError(fmt::format("config key {} must be >= 0", key));
      }
      out = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      out = number(*n, key);
    }
  }

  void get_doubles(const std::string& key, std::vector<double>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    consumed_.insert(key);
    const auto* arr = n->as_array();
    if (!arr) throw UsageError(fmt::format("config key {} must be an array of numbers", key));
    out.clear();
    for (const auto& e : *arr) out.push_back(number(e, key));
  }

  void get_ints(const std::string& key, std::vector<int>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    consumed_.insert(key);
    const auto* arr = n->as_array();
    if (!arr) throw UsageError(fmt::format("config key {} must be an array of integers", key));
    out.clear();
    for (const auto& e : *arr) out.push_back(static_cast<int>(require<int64_t>(e, key, "an array of integers")));
  }

  void get_strings(const std::string& key, std::vector<std::string>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    consumed_.insert(key);
    const auto* arr = n->as_array();
    if (!arr) throw UsageError(fmt::format("config key {} must be an array of strings", key));
    out.clear();
    for (const auto& e : *arr) out.push_back(require<std::string>(e, key, "an array of strings"));
  }

  void get_range(const std::string& key, std::pair<double, double>& out) {
    std::vector<double> v;
    get_doubles(key, v);
    if (v.empty() && !find(key)) return;
    if (v.size() != 2) throw UsageError(fmt::format("config key {} must be [low, high]", key));
    out = {v[0], v[1]};
  }

  void reject_unknown() const { walk(root_, ""); }

 private:
  const toml::node* find(const std::string& key) const {
    const toml::node* n = &static_cast<const toml::node&>(root_);
    for (const auto& part : split_key(key)) {
      const auto* t = n->as_table();
      if (!t) return nullptr;
      n = t->get(part);
      if (!n) return nullptr;
    }
    return n;
  }

  template <typename T>
  static T require(const toml::node& n, const std::string& key, const char* what) {
    auto v = n.value_exact<T>();
    if (!v) throw UsageError(fmt::format("config key {} must be {}", key, what));
    return *v;
  }

  static double number(const toml::node& n, const std::string& key) {
    if (auto d = n.value_exact<double>()) return *d;
    if (auto i = n.value_exact<int64_t>()) return static_cast<double>(*i);
    throw UsageError(fmt::format("config key {} must be a number", key));
  }

  void walk(const toml::table& t, const std::string& prefix) const {
    for (const auto& [k, v] : t) {
      const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (consumed_.count(key)) continue;
      if (const auto* sub = v.as_table()) {
        walk(*sub, key);
      } else {
        throw UsageError(fmt::format("unknown config key '{}'", key));
      }
    }
  }

  const toml::table& root_;
  std::set<std::string> consumed_;
};

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string toml_string(const std::string& s) {
  std::ostringstream os;
  os << toml::value<std::string>(s);
  return os.str();
}

EvalOptions AppConfig::eval_options() const {
  EvalOptions o;
  o.mpp = eval.mpp;
  o.radius_um = eval.radius_um;
  if (eval.matcher == "optimal") {
    o.mode = MatchMode::kOptimal;
  } else if (eval.matcher == "greedy") {
    o.mode = MatchMode::kGreedy;
  } else {
    throw UsageError(fmt::format("eval.matcher must be optimal or greedy, not '{}'", eval.matcher));
  }
  o.restricted_class_errors = eval.restricted_class_errors;
  o.class_names = pipeline.detector.class_names;
  o.threshold = eval.threshold;
  return o;
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<ConfigOverride>& overrides) {
  toml::table root;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw IoError("cannot open config " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      root = toml::parse(ss.str(), file->string());
    } catch (const toml::parse_error& e) {
      throw UsageError(fmt::format("{}: {}", file->string(), e.description()));
    }
  }
  for (const auto& o : overrides) apply_override(root, o);

  AppConfig c;
  Reader r(root);
  r.get("seed", c.seed);
  r.get("isa", c.isa);
  r.get("log_level", c.log_level);

  auto& p = c.pipeline;
  r.get("tiling.tile_size", p.tile_size);
  r.get("tiling.tile_overlap", p.tile_overlap);
  r.get("tiling.window_size", p.window_size);
  r.get("tiling.window_overlap", p.window_overlap);
  r.get("tiling.mpp_target", p.mpp_target);
  r.get("tiling.min_tissue_fraction", p.min_tissue_fraction);
  r.get("pipeline.worker_count", p.worker_count);
  r.get("tissue.thumbnail_max_dim", p.thumbnail_max_dim);
  std::vector<double> thr;
  r.get_doubles("tissue.thresholds", thr);
  if (!thr.empty()) {
    if (thr.size() != 3) throw UsageError("tissue.thresholds must have 3 entries (H, E, D)");
    p.tissue.density = {thr[0], thr[1], thr[2]};
  }
  r.get("tissue.open_radius", p.tissue.open_radius);
  r.get("tissue.close_radius", p.tissue.close_radius);

  auto& d = p.detector;
  r.get("detector.num_queries", d.num_queries);
  r.get("detector.top_k", d.top_k);
  r.get("detector.confidence_threshold", d.confidence_threshold);
  r.get("detector.max_batch", d.max_batch);
  r.get_strings("detector.classes", d.class_names);
  r.get("detector.backend", c.backend.kind);
  r.get("detector.annotations", c.backend.annotations);
  r.get_strings("detector.adapter_command", c.backend.adapter_command);
  r.get("detector.sidecar_dir", c.backend.sidecar_dir);
  auto& n = c.backend.noise;
  r.get("detector.noise.drop_prob", n.drop_prob);
  r.get("detector.noise.jitter_sigma", n.jitter_sigma);
  r.get("detector.noise.class_flip_prob", n.class_flip_prob);
  r.get_range("detector.noise.score_range_true", n.score_range_true);
  r.get_range("detector.noise.score_range_false", n.score_range_false);
  r.get("detector.noise.false_positive_rate", n.false_positive_rate);

  r.get("input.slide", c.input.slide);
  r.get("input.mpp", c.input.mpp);
  r.get("input.predictions", c.input.predictions);
  r.get("input.ground_truth", c.input.ground_truth);
  if (c.input.mpp < 0) throw UsageError("input.mpp must be >= 0");

  r.get("output.slide", c.output.slide);
  r.get("output.annotations", c.output.annotations);
  r.get("output.mask", c.output.mask);
  r.get("output.tiles", c.output.tiles);
  r.get("output.report", c.output.report);
  r.get("output.sweep", c.output.sweep);
  r.get("output.detections", c.output.detections);
  r.get("output.format", c.output.format);
  r.get("output.manifest", c.output.manifest);
  r.get("output.partial", c.output.partial);

  r.get("eval.mpp", c.eval.mpp);
  r.get("eval.radius_um", c.eval.radius_um);
  r.get("eval.matcher", c.eval.matcher);
  r.get("eval.restricted_class_errors", c.eval.restricted_class_errors);
  r.get("eval.threshold", c.eval.threshold);
  r.get_doubles("eval.sweep_grid", c.eval.sweep_grid);
  if (c.eval.sweep_grid.empty()) {
    for (int k = 0; k <= 20; ++k) c.eval.sweep_grid.push_back(k / 20.0);
  }

  auto& s = c.synth;
  r.get("synth.width", s.width);
  r.get("synth.height", s.height);
  r.get("synth.mpp", s.mpp);
  r.get("synth.nucleus_count", s.nucleus_count);
  r.get("synth.diameter_min", s.diameter_min);
  r.get("synth.diameter_max", s.diameter_max);
  r.get_doubles("synth.class_weights", s.class_weights);
  r.get("synth.max_attempts", s.max_attempts);
  r.get("synth.min_gap", s.min_gap);
  r.get("synth.tissue_inset", s.tissue_inset);
  r.get("synth.blank", s.blank);
  r.get_strings("synth.tissue_names", s.tissue_names);

  r.get_ints("bench.sizes", c.bench.sizes);
  r.get("bench.nuclei_per_mpx", c.bench.nuclei_per_mpx);
  r.get_strings("bench.slides", c.bench.slides);
  r.get_strings("bench.annotations", c.bench.annotations);
  r.get("bench.csv", c.bench.csv);
  r.get("bench.fit", c.bench.fit);

  r.reject_unknown();

  s.rng_seed = mix_seed(c.seed, 0);
  n.rng_seed = mix_seed(c.seed, 1);
  if (c.backend.kind != "oracle" && c.backend.kind != "jitter" && c.backend.kind != "process") {
    throw UsageError(fmt::format("detector.backend must be oracle, jitter or process, not '{}'", c.backend.kind));
  }
  n.validate();
  (void)c.eval_options();
  return c;
}

BackendFactory make_backend_factory(const AppConfig& c) {
  const auto& b = c.backend;
  if (b.kind == "process") {
    if (b.adapter_command.empty()) throw UsageError("detector.adapter_command is required for the process backend");
    const std::filesystem::path dir =
        b.sidecar_dir.empty() ? std::filesystem::temp_directory_path() / "wsinuc" : std::filesystem::path(b.sidecar_dir);
    return [cmd = b.adapter_command, dir] { return std::make_unique<ProcessBackend>(cmd, dir); };
  }
  if (b.annotations.empty()) throw UsageError(fmt::format("detector.annotations is required for the {} backend", b.kind));
  auto records = std::make_shared<const std::vector<Annotation>>(read_annotations_jsonl(b.annotations).records);
  if (b.kind == "oracle") {
    return [records]() -> std::unique_ptr<DetectorBackend> { return std::make_unique<OracleBackend>(*records); };
  }
  return [records, noise = b.noise]() -> std::unique_ptr<DetectorBackend> {
    return std::make_unique<JitterBackend>(*records, noise);
  };
}

std::string config_to_json(const AppConfig& c) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  const auto& p = c.pipeline;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["isa"] = c.isa;
  j["input"] = {{"slide", c.input.slide}, {"mpp", c.input.mpp}};
  j["tiling"] = {{"tile_size", p.tile_size},
                 {"tile_overlap", p.tile_overlap},
                 {"window_size", p.window_size},
                 {"window_overlap", p.window_overlap},
                 {"mpp_target", p.mpp_target},
                 {"min_tissue_fraction", p.min_tissue_fraction}};
  j["pipeline"] = {{"worker_count", p.worker_count}};
  j["tissue"] = {{"thumbnail_max_dim", p.thumbnail_max_dim},
                 {"thresholds", {num(p.tissue.density[0]), num(p.tissue.density[1]), num(p.tissue.density[2])}},
                 {"open_radius", p.tissue.open_radius},
                 {"close_radius", p.tissue.close_radius}};
  const auto& n = c.backend.noise;
  j["detector"] = {{"backend", c.backend.kind},
                   {"num_queries", p.detector.num_queries},
                   {"top_k", p.detector.top_k},
                   {"confidence_threshold", p.detector.confidence_threshold},
                   {"max_batch", p.detector.max_batch},
                   {"classes", p.detector.class_names},
                   {"annotations", c.backend.annotations},
                   {"adapter_command", c.backend.adapter_command},
                   {"noise",
                    {{"drop_prob", n.drop_prob},
                     {"jitter_sigma", n.jitter_sigma},
                     {"class_flip_prob", n.class_flip_prob},
                     {"score_range_true", {n.score_range_true.first, n.score_range_true.second}},
                     {"score_range_false", {n.score_range_false.first, n.score_range_false.second}},
                     {"false_positive_rate", n.false_positive_rate}}}};
  return j.dump();
}

}  // namespace wsinuc
