#pragma once

// Minimal blocking TCP helpers (POSIX) with poll()-based timeouts, and
// frame-level send/receive for the wire protocol.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "trafficgp/errors.hpp"
#include "trafficgp/protocol.hpp"

namespace trafficgp::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;

  [[nodiscard]] std::string str() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

inline Endpoint parse_endpoint(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) {
    throw Error(ErrorCode::Config, "endpoint '" + std::string(s) + "' is not HOST:PORT");
  }
  Endpoint e;
  e.host = std::string(s.substr(0, colon));
  const auto port_str = std::string(s.substr(colon + 1));
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_str.size() || port < 0 || port > 65535) {
    throw Error(ErrorCode::Config, "endpoint '" + std::string(s) + "' has an invalid port");
  }
  e.port = port;
  return e;
}

using Clock = std::chrono::steady_clock;

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  [[nodiscard]] int fd() const noexcept { return fd_; }
  [[nodiscard]] bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

namespace detail {

inline sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || !res) throw Error(ErrorCode::Io, "cannot resolve '" + e.host + "': " + ::gai_strerror(rc));
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(static_cast<std::uint16_t>(e.port));
  return addr;
}

inline int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left > 0 ? static_cast<int>(std::min<long long>(left, 1 << 30)) : 0;
}

inline bool wait_readable(int fd, Clock::time_point deadline) {
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw Error(ErrorCode::Io, std::string("poll: ") + std::strerror(errno));
  }
}

}  // namespace detail

class Listener {
 public:
  explicit Listener(const Endpoint& at) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto addr = detail::resolve(at);
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw Error(ErrorCode::Io, "bind " + at.str() + ": " + std::strerror(errno));
    }
    if (::listen(s.fd(), 4) != 0) throw Error(ErrorCode::Io, std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    endpoint_ = {at.host, ntohs(addr.sin_port)};
    sock_ = std::move(s);
  }

  /// Bound address; the port is resolved when 0 was requested.
  [[nodiscard]] const Endpoint& endpoint() const noexcept { return endpoint_; }

  Socket accept(std::chrono::milliseconds timeout = std::chrono::hours(24 * 365)) {
    const auto deadline = Clock::now() + timeout;
    if (!detail::wait_readable(sock_.fd(), deadline)) throw Error(ErrorCode::Timeout, "accept timed out");
    Socket c(::accept(sock_.fd(), nullptr, nullptr));
    if (!c.valid()) throw Error(ErrorCode::Io, std::string("accept: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(c.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return c;
  }

 private:
  Socket sock_;
  Endpoint endpoint_;
};

/// Connects, retrying refused attempts until the timeout expires (workers
/// may still be starting).
inline Socket connect(const Endpoint& to, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  const auto addr = detail::resolve(to);
  for (;;) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    const int err = errno;
    if (Clock::now() >= deadline) {
      throw Error(ErrorCode::Timeout, "connect " + to.str() + " timed out: " + std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

inline void send_all(const Socket& s, std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(s.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// Reads exactly n bytes. Returns false on a clean EOF before the first byte;
/// EOF mid-way is a truncated-frame protocol error.
inline bool recv_exact(const Socket& s, char* out, std::size_t n, Clock::time_point deadline) {
  std::size_t got = 0;
  while (got < n) {
    if (!detail::wait_readable(s.fd(), deadline)) throw Error(ErrorCode::Timeout, "receive timed out");
    const ssize_t r = ::recv(s.fd(), out + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("recv: ") + std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::Protocol, "truncated frame: connection closed after " + std::to_string(got) + " of " +
                                           std::to_string(n) + " bytes");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline void send_message(const Socket& s, const protocol::Message& m) { send_all(s, protocol::encode(m)); }

/// Receives one message; throws Protocol on EOF (peer closed).
inline protocol::Message recv_message(const Socket& s, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  char header[4];
  if (!recv_exact(s, header, 4, deadline)) throw Error(ErrorCode::Protocol, "connection closed by peer");
  const std::uint32_t n = protocol::read_length(std::string_view(header, 4));
  std::string body(n, '\0');
  if (n > 0 && !recv_exact(s, body.data(), n, deadline)) {
    throw Error(ErrorCode::Protocol, "truncated frame: header promises " + std::to_string(n) + " bytes");
  }
  return protocol::decode_body(body);
}

}  // namespace trafficgp::net
