#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/protocol.hpp"

namespace camplace {

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Listening socket on 127.0.0.1:`port` (0 picks a free port).
inline Socket listen_tcp(int port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s) throw Error(Errc::bind_failure, std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw Error(Errc::bind_failure, "port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  if (::listen(s.fd(), 16) != 0) throw Error(Errc::bind_failure, std::strerror(errno));
  return s;
}

inline int bound_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

inline bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

/// Serves one connection until close, EOF or a write failure.
inline void serve_connection(Socket conn, std::shared_ptr<const PointCloud> scene,
                             const EnvConfig& config) {
  Session session(std::move(scene), config);
  std::string buffer;
  char chunk[4096];
  while (!session.closed()) {
    const ssize_t n = ::recv(conn.fd(), chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while (!session.closed() && (nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!send_all(conn.fd(), session.handle(line) + "\n")) return;
    }
  }
}

/// Accepts connections and serves each on its own thread with its own
/// environment. Returns after `max_connections` connections have finished
/// (0 = serve forever).
inline void serve_tcp(Socket listener, std::shared_ptr<const PointCloud> scene,
                      const EnvConfig& config, int max_connections = 0) {
  std::vector<std::thread> workers;
  for (int served = 0; max_connections == 0 || served < max_connections; ++served) {
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) {
        --served;
        continue;
      }
      break;
    }
    workers.emplace_back(serve_connection, Socket(fd), scene, config);
  }
  for (auto& w : workers) w.join();
}

}  // namespace camplace
