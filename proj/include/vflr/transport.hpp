// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Point-to-point frame transports between the two parties. Each endpoint
// owns one ordered outbound stream and one ordered inbound stream.

#pragma once

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "vflr/bytes.hpp"
#include "vflr/errors.hpp"

namespace vflr::transport {

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  // Sends one complete frame (length | kind | payload).
  virtual void send(const Bytes& frame) = 0;
  // Blocks for the next frame; nullopt once the peer has closed its side.
  virtual std::optional<Bytes> recv() = 0;
  // Closes the outbound direction. Idempotent.
  virtual void close() = 0;
};

struct EndpointPair {
  std::unique_ptr<Endpoint> bob;
  std::unique_ptr<Endpoint> alice;
};

namespace detail {

class FrameQueue {
 public:
  void push(Bytes frame) {
    {
      std::lock_guard lock(mu_);
      if (closed_) throw ProtocolError("transport: send on closed channel");
      frames_.push_back(std::move(frame));
    }
    cv_.notify_one();
  }

  std::optional<Bytes> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !frames_.empty(); });
    if (frames_.empty()) return std::nullopt;
    Bytes out = std::move(frames_.front());
    frames_.pop_front();
    return out;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> frames_;
  bool closed_ = false;
};

class QueueEndpoint final : public Endpoint {
 public:
  QueueEndpoint(std::shared_ptr<FrameQueue> out, std::shared_ptr<FrameQueue> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~QueueEndpoint() override { close(); }

  void send(const Bytes& frame) override { out_->push(frame); }
  std::optional<Bytes> recv() override { return in_->pop(); }
  void close() override { out_->close(); }

 private:
  std::shared_ptr<FrameQueue> out_;
  std::shared_ptr<FrameQueue> in_;
};

class SocketEndpoint final : public Endpoint {
 public:
  explicit SocketEndpoint(int fd) : fd_(fd) {}
  ~SocketEndpoint() override {
    if (fd_ >= 0) ::close(fd_);
  }
  SocketEndpoint(const SocketEndpoint&) = delete;
  SocketEndpoint& operator=(const SocketEndpoint&) = delete;

  void send(const Bytes& frame) override {
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("transport: send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<Bytes> recv() override {
    Bytes frame(5);
    if (!read_exact(frame.data(), 5, /*eof_ok=*/true)) return std::nullopt;
    const std::uint32_t length = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                                 (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
    frame.resize(5 + static_cast<std::size_t>(length));
    read_exact(frame.data() + 5, length, /*eof_ok=*/false);
    return frame;
  }

  void close() override {
    if (!shut_) {
      ::shutdown(fd_, SHUT_WR);
      shut_ = true;
    }
  }

 private:
  bool read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r == 0) {
        if (eof_ok && got == 0) return false;
        throw ProtocolError("transport: peer closed mid-frame");
      }
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("transport: recv failed: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  int fd_;
  bool shut_ = false;
};

}  // namespace detail

inline EndpointPair make_inprocess_pair() {
  auto to_alice = std::make_shared<detail::FrameQueue>();
  auto to_bob = std::make_shared<detail::FrameQueue>();
  return EndpointPair{std::make_unique<detail::QueueEndpoint>(to_alice, to_bob),
                      std::make_unique<detail::QueueEndpoint>(to_bob, to_alice)};
}

// Connected AF_UNIX stream sockets carrying the same length-prefixed frames.
inline EndpointPair make_socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw ProtocolError(std::string("transport: socketpair failed: ") + std::strerror(errno));
  }
  return EndpointPair{std::make_unique<detail::SocketEndpoint>(fds[0]),
                      std::make_unique<detail::SocketEndpoint>(fds[1])};
}

}  // namespace vflr::transport
