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

#include "wsinuc/annotations.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include "json.hpp"

#include "wsinuc/errors.hpp"

namespace wsinuc {

AnnotationSet read_annotations_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations " + path.string());
  AnnotationSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Annotation a;
      a.cx = j.at("cx").get<double>();
      a.cy = j.at("cy").get<double>();
      a.w = j.at("w").get<double>();
      a.h = j.at("h").get<double>();
      a.class_id = j.at("class").get<int>();
      if (auto it = j.find("tissue"); it != j.end() && it->is_string()) a.tissue = it->get<std::string>();
      set.records.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(fmt::format("{}:{}: malformed annotation: {}", path.string(), line_no, e.what()));
    }
  }
  return set;
}

void write_annotations_jsonl(const std::filesystem::path& path, const AnnotationSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write annotations " + path.string());
  for (const auto& a : set.records) {
    out << fmt::format(R"({{"cx":{},"cy":{},"w":{},"h":{},"class":{})", a.cx, a.cy, a.w, a.h, a.class_id);
    if (a.tissue) out << R"(,"tissue":)" << nlohmann::json(*a.tissue).dump();
    out << "}\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Detection> to_detections(const AnnotationSet& set) {
  std::vector<Detection> dets;
  dets.reserve(set.records.size());
  for (const auto& a : set.records) dets.push_back({a.cx, a.cy, a.w, a.h, a.class_id, 1.0});
  std::sort(dets.begin(), dets.end(), detection_less);
  return dets;
}

}  // namespace wsinuc
