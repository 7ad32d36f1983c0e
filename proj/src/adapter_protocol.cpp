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

#include "wsinuc/adapter.hpp"

#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "wsinuc/errors.hpp"

namespace wsinuc {
namespace protocol {
namespace {

using ojson = nlohmann::ordered_json;

constexpr size_t kPayloadLogLimit = 512;

std::string clip(const std::string& s) {
  if (s.size() <= kPayloadLogLimit) return s;
  return s.substr(0, kPayloadLogLimit) + "...";
}

[[noreturn]] void reject(const std::string& why, const std::string& payload) {
  spdlog::error("adapter protocol: {}; payload: {}", why, clip(payload));
  throw BackendError(fmt::format("adapter protocol: {}; payload: {}", why, clip(payload)));
}

nlohmann::json parse(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    reject(fmt::format("malformed JSON ({})", e.what()), line);
  }
}

void expect_type(const nlohmann::json& j, const char* type, const std::string& line) {
  if (!j.is_object()) reject("message is not an object", line);
  auto it = j.find("type");
  if (it == j.end() || !it->is_string()) reject("message has no type", line);
  if (*it != type) reject(fmt::format("expected '{}', got '{}'", type, it->get<std::string>()), line);
}

double number_field(const nlohmann::json& o, const char* key, const std::string& line) {
  auto it = o.find(key);
  if (it == o.end() || !it->is_number()) reject(fmt::format("detection field '{}' missing or not a number", key), line);
  return it->get<double>();
}

}  // namespace

std::string base64_encode(std::span<const uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw BackendError("base64 length is not a multiple of 4");
  std::vector<uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw BackendError("invalid base64");
  // EVP_DecodeBlock keeps the padding bytes as zeros.
  size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

std::string encode_hello(const DetectorConfig& cfg, const std::optional<std::string>& window_rects_path) {
  ojson j;
  j["type"] = "hello";
  j["window_size"] = cfg.window_size;
  j["mpp"] = cfg.mpp;
  j["classes"] = cfg.class_names;
  if (window_rects_path) j["window_rects_path"] = *window_rects_path;
  return j.dump();
}

std::string encode_infer(int64_t id, std::span<const WindowItem> windows) {
  ojson j;
  j["type"] = "infer";
  j["id"] = id;
  auto arr = ojson::array();
  for (const auto& w : windows) {
    ojson o;
    o["wid"] = w.window_id;
    o["w"] = w.image.width();
    o["h"] = w.image.height();
    o["rgb_b64"] = base64_encode(w.image.pixels());
    arr.push_back(std::move(o));
  }
  j["windows"] = std::move(arr);
  return j.dump();
}

std::string encode_shutdown() { return R"({"type":"shutdown"})"; }

int decode_ready(const std::string& line) {
  const auto j = parse(line);
  expect_type(j, "ready", line);
  auto it = j.find("max_batch");
  if (it == j.end() || !it->is_number_integer() || it->get<int64_t>() < 1) {
    reject("ready.max_batch must be a positive integer", line);
  }
  return static_cast<int>(std::min<int64_t>(it->get<int64_t>(), 1 << 20));
}

WindowResults decode_result(const std::string& line, int64_t expected_id, size_t expected_windows) {
  const auto j = parse(line);
  expect_type(j, "result", line);
  auto id = j.find("id");
  if (id == j.end() || !id->is_number_integer()) reject("result.id missing", line);
  if (id->get<int64_t>() != expected_id) {
    reject(fmt::format("out-of-order result id {} (expected {})", id->get<int64_t>(), expected_id), line);
  }
  auto dets = j.find("detections");
  if (dets == j.end() || !dets->is_array()) reject("result.detections missing", line);
  if (dets->size() != expected_windows) {
    reject(fmt::format("result has {} window lists for {} windows", dets->size(), expected_windows), line);
  }
  WindowResults out;
  out.reserve(expected_windows);
  for (const auto& per_window : *dets) {
    if (!per_window.is_array()) reject("window detection list is not an array", line);
    std::vector<Detection> list;
    list.reserve(per_window.size());
    for (const auto& o : per_window) {
      if (!o.is_object()) reject("detection is not an object", line);
      Detection d;
      d.cx = number_field(o, "cx", line);
      d.cy = number_field(o, "cy", line);
      d.w = number_field(o, "w", line);
      d.h = number_field(o, "h", line);
      d.score = number_field(o, "score", line);
      auto cls = o.find("class");
      if (cls == o.end() || !cls->is_number_integer()) reject("detection class missing or not an integer", line);
      d.class_id = cls->get<int>();
      list.push_back(d);
    }
    out.push_back(std::move(list));
  }
  return out;
}

std::string window_rects_json(std::span<const WindowRect> windows) {
  ojson j;
  auto arr = ojson::array();
  for (const auto& w : windows) {
    arr.push_back({{"wid", w.window_id}, {"x0", w.rect.x0}, {"y0", w.rect.y0}, {"x1", w.rect.x1}, {"y1", w.rect.y1}});
  }
  j["windows"] = std::move(arr);
  return j.dump();
}

}  // namespace protocol

void StreamTransport::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw BackendError("adapter channel closed while writing");
}

std::optional<std::string> StreamTransport::read_line() {
  std::string line;
  if (!std::getline(in_, line)) return std::nullopt;
  return line;
}

std::string AdapterSession::expect_line(const char* waiting_for) {
  auto line = transport_.read_line();
  if (!line) throw BackendError(fmt::format("adapter closed the channel while waiting for {}", waiting_for));
  return *line;
}

void AdapterSession::open(const DetectorConfig& cfg, const std::optional<std::string>& window_rects_path) {
  if (open_) throw BackendError("adapter session already open");
  transport_.write_line(protocol::encode_hello(cfg, window_rects_path));
  max_batch_ = protocol::decode_ready(expect_line("ready"));
  open_ = true;
}

WindowResults AdapterSession::infer(std::span<const WindowItem> windows) {
  if (!open_) throw BackendError("adapter session is not open");
  WindowResults out;
  out.reserve(windows.size());
  for (size_t start = 0; start < windows.size(); start += max_batch_) {
    const auto chunk = windows.subspan(start, std::min<size_t>(max_batch_, windows.size() - start));
    const int64_t id = next_id_++;
    transport_.write_line(protocol::encode_infer(id, chunk));
    auto got = protocol::decode_result(expect_line("result"), id, chunk.size());
    for (auto& d : got) out.push_back(std::move(d));
  }
  return out;
}

void AdapterSession::shutdown() {
  if (!open_) return;
  open_ = false;
  transport_.write_line(protocol::encode_shutdown());
}

}  // namespace wsinuc
