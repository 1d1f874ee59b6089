#pragma once
// Minimal blocking TCP pieces for the loopback service: a listener, a
// stream with read-some/write-all, and addr:port parsing. IPv4 only.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"

namespace chiron::net {

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

inline std::optional<Endpoint> parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon + 1 >= s.size()) return std::nullopt;
  Endpoint ep;
  ep.host = s.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  unsigned long port = 0;
  try {
    port = std::stoul(s.substr(colon + 1));
  } catch (...) {
    return std::nullopt;
  }
  // Port 0 is allowed: binding it asks the kernel for an ephemeral port.
  if (port > 65535 || (port == 0 && s.substr(colon + 1) != "0")) return std::nullopt;
  ep.port = static_cast<uint16_t>(port);
  return ep;
}

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  TcpStream& operator=(TcpStream&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream() { close(); }

  bool valid() const { return fd_ >= 0; }

  // Up to `max` bytes; empty result = orderly shutdown by the peer.
  Bytes read_some(size_t max = 64 * 1024) {
    Bytes buf(max);
    for (;;) {
      ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n >= 0) {
        buf.resize(static_cast<size_t>(n));
        return buf;
      }
      if (errno == EINTR) continue;
      throw Error(Errc::IO_ERROR, std::string("recv: ") + std::strerror(errno));
    }
  }

  void write_all(ByteSpan data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::IO_ERROR, std::string("send: ") + std::strerror(errno));
      }
      off += static_cast<size_t>(n);
    }
  }

  void shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

  // Unblocks a reader stuck in read_some from another thread.
  void shutdown_rw() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener(const std::string& host, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(Errc::IO_ERROR, "socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw Error(Errc::IO_ERROR, "bad listen address: " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd_, 64) != 0) {
      int err = errno;
      ::close(fd_);
      throw Error(Errc::IO_ERROR, std::string("bind/listen: ") + std::strerror(err));
    }

    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() { close(); }

  uint16_t port() const { return port_; }

  // Blocks; invalid stream after close() from another thread.
  TcpStream accept() {
    for (;;) {
      int fd = ::accept(fd_, nullptr, nullptr);
      if (fd >= 0) return TcpStream(fd);
      if (errno == EINTR) continue;
      return TcpStream();
    }
  }

  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

inline TcpStream connect_tcp(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::IO_ERROR, "socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error(Errc::IO_ERROR, "bad address: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd);
    throw Error(Errc::IO_ERROR, std::string("connect: ") + std::strerror(err));
  }
  return TcpStream(fd);
}

}  // namespace chiron::net
