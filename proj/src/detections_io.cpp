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

#include "wsinuc/detections_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "wsinuc/errors.hpp"

namespace wsinuc {
namespace {

std::string num(double v) { return fmt::format("{:.9g}", v); }

std::string class_name(std::span<const std::string> names, int id) {
  if (id >= 0 && static_cast<size_t>(id) < names.size()) return names[id];
  return fmt::format("class{}", id);
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

Detection from_json(const nlohmann::json& j) {
  return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
          j.at("h").get<double>(),  j.at("class").get<int>(),  j.at("score").get<double>()};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

DetectionFormat parse_detection_format(const std::string& name) {
  if (name == "jsonl") return DetectionFormat::kJsonl;
  if (name == "csv") return DetectionFormat::kCsv;
  if (name == "geojson") return DetectionFormat::kGeoJson;
  throw UsageError(fmt::format("unknown detection format '{}' (jsonl, csv, geojson)", name));
}

DetectionFormat detection_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jsonl" || ext == ".ndjson") return DetectionFormat::kJsonl;
  if (ext == ".csv") return DetectionFormat::kCsv;
  if (ext == ".geojson" || ext == ".json") return DetectionFormat::kGeoJson;
  throw UsageError("cannot infer detection format from " + path.string());
}

std::string format_detections(std::span<const Detection> dets, DetectionFormat format,
                              std::span<const std::string> class_names) {
  std::string out;
  switch (format) {
    case DetectionFormat::kJsonl:
      for (const auto& d : dets) {
        out += fmt::format(R"({{"cx":{},"cy":{},"w":{},"h":{},"class":{},"class_name":{},"score":{}}})", num(d.cx),
                           num(d.cy), num(d.w), num(d.h), d.class_id, json_string(class_name(class_names, d.class_id)),
                           num(d.score));
        out += '\n';
      }
      break;
    case DetectionFormat::kCsv:
      out += "cx,cy,w,h,class,class_name,score\n";
      for (const auto& d : dets) {
        out += fmt::format("{},{},{},{},{},{},{}\n", num(d.cx), num(d.cy), num(d.w), num(d.h), d.class_id,
                           csv_field(class_name(class_names, d.class_id)), num(d.score));
      }
      break;
    case DetectionFormat::kGeoJson: {
      out += R"({"type":"FeatureCollection","features":[)";
      for (size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        out += i ? ",\n" : "\n";
        out += fmt::format(
            R"({{"type":"Feature","geometry":{{"type":"Point","coordinates":[{},{}]}},)"
            R"("properties":{{"class":{},"class_name":{},"score":{},"w":{},"h":{}}}}})",
            num(d.cx), num(d.cy), d.class_id, json_string(class_name(class_names, d.class_id)), num(d.score),
            num(d.w), num(d.h));
      }
      out += dets.empty() ? "]}\n" : "\n]}\n";
      break;
    }
  }
  return out;
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> dets, DetectionFormat format,
                      std::span<const std::string> class_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_detections(dets, format, class_names);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  const DetectionFormat format = detection_format_for(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open detections " + path.string());
  std::vector<Detection> dets;
  std::string line;
  int line_no = 0;
  try {
    switch (format) {
      case DetectionFormat::kJsonl:
        while (std::getline(in, line)) {
          ++line_no;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          dets.push_back(from_json(nlohmann::json::parse(line)));
        }
        break;
      case DetectionFormat::kCsv: {
        std::vector<std::string> header;
        while (std::getline(in, line)) {
          ++line_no;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          auto fields = split_csv(line);
          if (header.empty()) {
            header = std::move(fields);
            continue;
          }
          if (fields.size() != header.size()) throw IoError(fmt::format("{}:{}: field count", path.string(), line_no));
          auto col = [&](const char* name) -> const std::string& {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw IoError(fmt::format("{}: missing column {}", path.string(), name));
            return fields[it - header.begin()];
          };
          dets.push_back({std::stod(col("cx")), std::stod(col("cy")), std::stod(col("w")), std::stod(col("h")),
                          std::stoi(col("class")), std::stod(col("score"))});
        }
        break;
      }
      case DetectionFormat::kGeoJson: {
        std::stringstream ss;
        ss << in.rdbuf();
        const auto j = nlohmann::json::parse(ss.str());
        for (const auto& f : j.at("features")) {
          const auto& c = f.at("geometry").at("coordinates");
          const auto& p = f.at("properties");
          dets.push_back({c.at(0).get<double>(), c.at(1).get<double>(), p.value("w", 0.0), p.value("h", 0.0),
                          p.at("class").get<int>(), p.value("score", 1.0)});
        }
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}:{}: malformed detection: {}", path.string(), line_no, e.what()));
  } catch (const std::logic_error& e) {
    throw IoError(fmt::format("{}:{}: malformed detection: {}", path.string(), line_no, e.what()));
  }
  return dets;
}

}  // namespace wsinuc
