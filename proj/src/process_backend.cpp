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

#include <fcntl.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "wsinuc/adapter.hpp"
#include "wsinuc/errors.hpp"

namespace wsinuc {

// Bidirectional socket to the child; send() with MSG_NOSIGNAL so a dead
// adapter surfaces as an error rather than SIGPIPE.
class ProcessBackend::Pipe : public Transport {
 public:
  explicit Pipe(int fd) : fd_(fd) {}
  ~Pipe() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(const std::string& line) override {
    std::string buf = line;
    buf.push_back('\n');
    size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError(fmt::format("writing to adapter failed: {}", std::strerror(errno)));
      }
      off += static_cast<size_t>(n);
    }
  }

  std::optional<std::string> read_line() override {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError(fmt::format("reading from adapter failed: {}", std::strerror(errno)));
      }
      if (n == 0) {
        if (buffer_.empty()) return std::nullopt;
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  void close_write() { ::shutdown(fd_, SHUT_WR); }

 private:
  int fd_;
  std::string buffer_;
};

ProcessBackend::ProcessBackend(std::vector<std::string> argv, std::filesystem::path sidecar_dir)
    : argv_(std::move(argv)), sidecar_dir_(std::move(sidecar_dir)) {
  if (argv_.empty()) throw UsageError("adapter command is empty");
}

ProcessBackend::~ProcessBackend() {
  try {
    end_session();
  } catch (const std::exception& e) {
    spdlog::warn("adapter shutdown: {}", e.what());
  }
}

void ProcessBackend::spawn() {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw BackendError(fmt::format("socketpair failed: {}", std::strerror(errno)));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw BackendError(fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(sv[1]);
  pid_ = pid;
  pipe_ = std::make_unique<Pipe>(sv[0]);
  session_ = std::make_unique<AdapterSession>(*pipe_);
}

void ProcessBackend::reap() {
  if (pid_ < 0) return;
  using namespace std::chrono;
  const auto deadline = steady_clock::now() + seconds(5);
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_ || (r < 0 && errno != EINTR)) break;
    if (steady_clock::now() > deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      break;
    }
    std::this_thread::sleep_for(milliseconds(5));
  }
  pid_ = -1;
}

void ProcessBackend::begin_session(const DetectorConfig& cfg, std::span<const WindowRect> windows) {
  end_session();
  std::optional<std::string> sidecar;
  if (!windows.empty()) {
    static std::atomic<int> counter{0};
    std::filesystem::create_directories(sidecar_dir_);
    sidecar_path_ = sidecar_dir_ / fmt::format("adapter-windows-{}-{}.json", ::getpid(), counter++);
    std::ofstream out(sidecar_path_, std::ios::binary);
    out << protocol::window_rects_json(windows) << '\n';
    if (!out) throw IoError("cannot write " + sidecar_path_.string());
    sidecar = sidecar_path_.string();
  }
  spawn();
  session_->open(cfg, sidecar);
}

WindowResults ProcessBackend::infer(std::span<const WindowItem> batch, const DetectorConfig& cfg) {
  if (!session_ || !session_->is_open()) begin_session(cfg, {});
  return session_->infer(batch);
}

void ProcessBackend::end_session() {
  if (session_) {
    try {
      session_->shutdown();
    } catch (const BackendError& e) {
      spdlog::warn("adapter shutdown: {}", e.what());
    }
    pipe_->close_write();
  }
  reap();
  session_.reset();
  pipe_.reset();
  if (!sidecar_path_.empty()) {
    std::error_code ec;
    std::filesystem::remove(sidecar_path_, ec);
    sidecar_path_.clear();
  }
}

}  // namespace wsinuc
