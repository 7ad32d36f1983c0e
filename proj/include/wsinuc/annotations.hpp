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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wsinuc/geometry.hpp"

namespace wsinuc {

// One ground-truth nucleus in level-0 pixels.
struct Annotation {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
  int class_id = 0;
  std::optional<std::string> tissue;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationSet {
  std::vector<Annotation> records;
  // Resolution the coordinates refer to; 0 when unknown.
  double mpp = 0;
};

// JSONL, one record per line:
//   {"cx":float,"cy":float,"w":float,"h":float,"class":int,"tissue":string?}
// Doubles are written in shortest round-trip form.
AnnotationSet read_annotations_jsonl(const std::filesystem::path& path);
void write_annotations_jsonl(const std::filesystem::path& path, const AnnotationSet& set);

// Annotations as score-1 detections, in the canonical sorted order.
std::vector<Detection> to_detections(const AnnotationSet& set);

}  // namespace wsinuc
