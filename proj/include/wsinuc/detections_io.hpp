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
#include <span>
#include <string>
#include <vector>

#include "wsinuc/geometry.hpp"

namespace wsinuc {

enum class DetectionFormat {
  kJsonl,
  kCsv,
  kGeoJson,
};

DetectionFormat parse_detection_format(const std::string& name);
// From the file extension (.jsonl, .csv, .geojson / .json).
DetectionFormat detection_format_for(const std::filesystem::path& path);

// Floats are printed with 9 significant digits, so output is byte-stable.
//   jsonl:   {"cx":..,"cy":..,"w":..,"h":..,"class":..,"class_name":..,"score":..}
//   csv:     cx,cy,w,h,class,class_name,score
//   geojson: FeatureCollection of Point features
std::string format_detections(std::span<const Detection> dets, DetectionFormat format,
                              std::span<const std::string> class_names);
void write_detections(const std::filesystem::path& path, std::span<const Detection> dets, DetectionFormat format,
                      std::span<const std::string> class_names);

// Reads any of the three formats (by extension).
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace wsinuc
