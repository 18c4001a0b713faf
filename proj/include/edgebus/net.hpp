/*
 * Copyright (c) 2026, the edgebus authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include "edgebus/automaton.hpp"  // for Error
#include "edgebus/wire.hpp"

namespace edgebus::net {

/// Minimal RAII TCP socket. Failed sends report false rather than
/// throwing; the at-most-once delivery contract drops on failure.
class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd) : fd_(fd) {}
  TcpSocket(TcpSocket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  TcpSocket& operator=(TcpSocket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;
  ~TcpSocket() { close(); }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  static TcpSocket connect_to(const std::string& host, std::uint16_t port,
                              int timeout_ms = 5000) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
    if (rc != 0)
      throw Error("cannot resolve '" + host + "': " + gai_strerror(rc));

    int fd = -1;
    std::string err = "connection failed";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC,
                    ai->ai_protocol);
      if (fd < 0) continue;
      if (connect_with_timeout(fd, ai->ai_addr, ai->ai_addrlen, timeout_ms)) {
        break;
      }
      err = std::strerror(errno);
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
      throw Error("cannot connect to " + host + ":" + service + ": " + err);

    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpSocket(fd);
  }

  bool send_all(const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off,
                         MSG_NOSIGNAL);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        return false;
      }
      off += static_cast<size_t>(n);
    }
    return true;
  }

  /// Reads exactly n bytes. Returns false on EOF before any byte;
  /// throws on a short read mid-record or on errors.
  bool recv_exact(void* buf, size_t n) {
    auto* p = static_cast<char*>(buf);
    size_t off = 0;
    while (off < n) {
      ssize_t r = ::recv(fd_, p + off, n - off, 0);
      if (r == 0) {
        if (off == 0) return false;
        throw Error("connection closed mid-frame");
      }
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(std::string("recv failed: ") + std::strerror(errno));
      }
      off += static_cast<size_t>(r);
    }
    return true;
  }

  /// Reads one frame. nullopt on clean EOF; throws on protocol or
  /// transport errors.
  std::optional<wire::Frame> recv_frame() {
    unsigned char header[wire::kHeaderSize];
    if (!recv_exact(header, sizeof(header))) return std::nullopt;
    wire::FrameHeader h = wire::decode_header(header);
    if (h.length > wire::kMaxBody) throw Error("oversized frame announced");
    std::string body(h.length, '\0');
    if (h.length > 0 && !recv_exact(body.data(), body.size()))
      throw Error("connection closed mid-frame");
    return wire::decode_body(h, body);
  }

  bool send_frame(const wire::Frame& f) { return send_all(wire::encode_frame(f)); }

  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  static bool connect_with_timeout(int fd, const sockaddr* addr,
                                   socklen_t len, int timeout_ms) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, addr, len);
    bool ok = false;
    if (rc == 0) {
      ok = true;
    } else if (errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      if (::poll(&pfd, 1, timeout_ms) == 1) {
        int err = 0;
        socklen_t elen = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &elen);
        ok = (err == 0);
        if (!ok) errno = err;
      } else {
        errno = ETIMEDOUT;
      }
    }
    ::fcntl(fd, F_SETFL, flags);
    return ok;
  }

  int fd_ = -1;
};

/// Listening socket with a wake pipe so accept loops stop cleanly.
class TcpListener {
 public:
  TcpListener() = default;
  TcpListener(TcpListener&& other) noexcept
      : fd_(std::exchange(other.fd_, -1)),
        wake_rd_(std::exchange(other.wake_rd_, -1)),
        wake_wr_(std::exchange(other.wake_wr_, -1)),
        port_(other.port_) {}
  TcpListener(const TcpListener&) = delete;
  ~TcpListener() { close(); }

  static TcpListener listen_on(const std::string& host, std::uint16_t port) {
    TcpListener l;
    l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (l.fd_ < 0) throw Error("cannot create listening socket");
    int one = 1;
    ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw Error("bad listen address '" + host + "'");
    if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
      throw Error("cannot bind " + host + ":" + std::to_string(port) + ": " +
                  std::strerror(errno));
    if (::listen(l.fd_, 64) < 0) throw Error("listen failed");

    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
    l.port_ = ntohs(bound.sin_port);

    int pipefd[2];
    if (::pipe2(pipefd, O_CLOEXEC) < 0) throw Error("cannot create wake pipe");
    l.wake_rd_ = pipefd[0];
    l.wake_wr_ = pipefd[1];
    return l;
  }

  std::uint16_t port() const { return port_; }

  /// Blocks until a connection arrives or wake() is called.
  std::optional<TcpSocket> accept() {
    while (true) {
      pollfd pfds[2] = {{fd_, POLLIN, 0}, {wake_rd_, POLLIN, 0}};
      int rc = ::poll(pfds, 2, -1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        return std::nullopt;
      }
      if (pfds[1].revents) return std::nullopt;
      if (pfds[0].revents) {
        int cfd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (cfd < 0) {
          if (errno == EINTR || errno == ECONNABORTED) continue;
          return std::nullopt;
        }
        int one = 1;
        ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        return TcpSocket(cfd);
      }
    }
  }

  void wake() {
    if (wake_wr_ >= 0) {
      char b = 1;
      [[maybe_unused]] ssize_t n = ::write(wake_wr_, &b, 1);
    }
  }

  void close() {
    for (int* fd : {&fd_, &wake_rd_, &wake_wr_}) {
      if (*fd >= 0) {
        ::close(*fd);
        *fd = -1;
      }
    }
  }

 private:
  int fd_ = -1;
  int wake_rd_ = -1;
  int wake_wr_ = -1;
  std::uint16_t port_ = 0;
};

/// "host:port" with a numeric port.
inline std::pair<std::string, std::uint16_t> parse_endpoint(
    const std::string& s) {
  size_t colon = s.rfind(':');
  if (colon == std::string::npos)
    throw Error("expected host:port, got '" + s + "'");
  std::string host = s.substr(0, colon);
  std::string port_str = s.substr(colon + 1);
  try {
    unsigned long p = std::stoul(port_str);
    if (p > 65535) throw Error("");
    return {host, static_cast<std::uint16_t>(p)};
  } catch (...) {
    throw Error("bad port in '" + s + "'");
  }
}

}  // namespace edgebus::net
