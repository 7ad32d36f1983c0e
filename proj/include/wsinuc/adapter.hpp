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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsinuc/detector.hpp"

namespace wsinuc {

// Newline-delimited JSON spoken with an external detector adapter:
//   engine  -> {"type":"hello","window_size":256,"mpp":0.25,"classes":[...]}
//   adapter -> {"type":"ready","max_batch":N}
//   engine  -> {"type":"infer","id":k,"windows":[{"wid":i,"w":256,"h":256,"rgb_b64":"..."}]}
//   adapter -> {"type":"result","id":k,"detections":[[{"cx":..,"cy":..,"w":..,"h":..,"class":..,"score":..}],...]}
//   engine  -> {"type":"shutdown"}
namespace protocol {

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

// `window_rects_path` is an optional extension field naming a JSON file of
// {"windows":[{"wid":..,"x0":..,"y0":..,"x1":..,"y1":..}]}.
std::string encode_hello(const DetectorConfig& cfg, const std::optional<std::string>& window_rects_path = {});
std::string encode_infer(int64_t id, std::span<const WindowItem> windows);
std::string encode_shutdown();

// Parse replies; any deviation throws BackendError quoting the payload.
int decode_ready(const std::string& line);
WindowResults decode_result(const std::string& line, int64_t expected_id, size_t expected_windows);

std::string window_rects_json(std::span<const WindowRect> windows);

}  // namespace protocol

// A line-oriented duplex channel to an adapter.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_line(const std::string& line) = 0;
  // nullopt on end of stream.
  virtual std::optional<std::string> read_line() = 0;
};

class StreamTransport : public Transport {
 public:
  StreamTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  void write_line(const std::string& line) override;
  std::optional<std::string> read_line() override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

// Protocol state machine over a transport. Not thread-safe.
class AdapterSession {
 public:
  explicit AdapterSession(Transport& transport) : transport_(transport) {}

  // Sends hello and waits for ready.
  void open(const DetectorConfig& cfg, const std::optional<std::string>& window_rects_path = {});
  // Splits `windows` into requests of at most max_batch().
  WindowResults infer(std::span<const WindowItem> windows);
  void shutdown();

  int max_batch() const { return max_batch_; }
  bool is_open() const { return open_; }

 private:
  std::string expect_line(const char* waiting_for);

  Transport& transport_;
  int max_batch_ = 0;
  int64_t next_id_ = 0;
  bool open_ = false;
};

// Spawns `argv` and speaks the protocol over its stdin/stdout. One process
// per instance; instances are not shareable across workers.
class ProcessBackend : public DetectorBackend {
 public:
  // `sidecar_dir` receives the window-rectangle file announced in hello.
  ProcessBackend(std::vector<std::string> argv, std::filesystem::path sidecar_dir);
  ~ProcessBackend() override;
  ProcessBackend(const ProcessBackend&) = delete;
  ProcessBackend& operator=(const ProcessBackend&) = delete;

  std::string name() const override { return "process"; }
  void begin_session(const DetectorConfig& cfg, std::span<const WindowRect> windows) override;
  WindowResults infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) override;
  void end_session() override;

 private:
  class Pipe;
  void spawn();
  void reap();

  std::vector<std::string> argv_;
  std::filesystem::path sidecar_dir_;
  std::filesystem::path sidecar_path_;
  std::unique_ptr<Pipe> pipe_;
  std::unique_ptr<AdapterSession> session_;
  int pid_ = -1;
};

}  // namespace wsinuc
