#pragma once

// Line-delimited TCP ingest (POSIX sockets). One connection per server; the
// stream ends when the peer closes.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>

#include "bedrr/error.hpp"
#include "bedrr/stream.hpp"

namespace bedrr {

class TcpLineServer {
 public:
  /// Binds to 127.0.0.1:port (or any address when `any_address`); port 0
  /// picks a free port.
  explicit TcpLineServer(int port, bool any_address = false) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    addr.sin_addr.s_addr = htonl(any_address ? INADDR_ANY : INADDR_LOOPBACK);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 1) < 0) {
      const std::string msg = std::strerror(errno);
      ::close(fd_);
      fd_ = -1;
      throw IoError("cannot listen on port " + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  TcpLineServer(const TcpLineServer&) = delete;
  TcpLineServer& operator=(const TcpLineServer&) = delete;

  ~TcpLineServer() {
    if (conn_ >= 0) ::close(conn_);
    if (fd_ >= 0) ::close(fd_);
  }

  int port() const { return port_; }

  /// Blocks until a client connects, then returns a source yielding its
  /// lines. A final unterminated line is delivered at disconnect.
  LineSource accept_lines() {
    conn_ = ::accept(fd_, nullptr, nullptr);
    if (conn_ < 0) throw IoError(std::string("accept: ") + std::strerror(errno));
    return [this]() -> std::optional<std::string> { return next_line(); };
  }

 private:
  std::optional<std::string> next_line() {
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      if (eof_) {
        if (buf_.empty()) return std::nullopt;
        std::string line = std::move(buf_);
        buf_.clear();
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::recv(conn_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("recv: ") + std::strerror(errno));
      }
      if (n == 0) eof_ = true;
      else buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  int fd_ = -1, conn_ = -1, port_ = 0;
  std::string buf_;
  bool eof_ = false;
};

/// Client side: connects to host:port, sends `payload` and closes.
inline void tcp_send(const std::string& host, int port, const std::string& payload) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConfigError("invalid IPv4 address: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw IoError("connect: " + msg);
  }
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const ssize_t n = ::send(fd, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string msg = std::strerror(errno);
      ::close(fd);
      throw IoError("send: " + msg);
    }
    sent += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

}  // namespace bedrr
