#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/client.hpp"
#include "fedcbmir/fed/federation.hpp"
#include "fedcbmir/fed/serialize.hpp"
#include "fedcbmir/transport/message.hpp"

namespace fedcbmir {

inline constexpr std::chrono::seconds kDefaultCollectTimeout{60};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void shutdown() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

namespace detail {

inline std::string errno_text(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

// False on orderly EOF before the first byte; throws on EOF mid-buffer.
inline bool read_exact(int fd, std::uint8_t* dst, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const auto r = ::recv(fd, dst + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw DecodeError(DecodeFault::truncated, "connection closed inside a frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(errno_text("recv"));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline void write_all(int fd, const Bytes& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(r);
  }
}

}  // namespace detail

// Reads one frame. nullopt on clean EOF between frames.
inline std::optional<Message> read_frame(int fd) {
  Bytes frame(4);
  if (!detail::read_exact(fd, frame.data(), 4)) return std::nullopt;
  const std::uint32_t total = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                              (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
  if (total < kFrameHeaderSize || total > kMaxFrameSize) {
    throw DecodeError(DecodeFault::length_mismatch, "frame length " + std::to_string(total));
  }
  frame.resize(total);
  if (!detail::read_exact(fd, frame.data() + 4, total - 4)) {
    throw DecodeError(DecodeFault::truncated, "connection closed inside a frame");
  }
  return decode_message(frame);
}

inline void write_frame(int fd, const Message& m) { detail::write_all(fd, encode_message(m)); }

inline Socket listen_on(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0) {
    throw ConfigError("cannot resolve listen address " + host);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (!s.valid()) throw ProtocolError(detail::errno_text("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(s.fd(), res->ai_addr, res->ai_addrlen) != 0) {
    throw ConfigError(detail::errno_text("bind " + host + ":" + service));
  }
  if (::listen(s.fd(), 64) != 0) throw ProtocolError(detail::errno_text("listen"));
  return s;
}

inline std::uint16_t bound_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

// Connects, retrying for up to `patience` so clients may start before the server.
inline Socket connect_to(const std::string& host, std::uint16_t port,
                         std::chrono::milliseconds patience = std::chrono::seconds(30)) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) {
    throw ConfigError("cannot resolve server address " + host);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  const auto deadline = std::chrono::steady_clock::now() + patience;
  for (;;) {
    Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    if (!s.valid()) throw ProtocolError(detail::errno_text("socket"));
    if (::connect(s.fd(), res->ai_addr, res->ai_addrlen) == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError(detail::errno_text("connect " + host + ":" + service));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

// Server side of the TCP transport. One reader thread per connection feeds a
// shared inbox; writes are serialized per connection.
class WireServerLink final : public FederationLink<float> {
 public:
  WireServerLink(const std::string& host, std::uint16_t port,
                 std::chrono::milliseconds collect_timeout = kDefaultCollectTimeout,
                 std::chrono::milliseconds join_timeout = kDefaultCollectTimeout)
      : listener_(listen_on(host, port)),
        collect_timeout_(collect_timeout),
        join_timeout_(join_timeout) {}

  WireServerLink(const WireServerLink&) = delete;
  WireServerLink& operator=(const WireServerLink&) = delete;
  ~WireServerLink() override { close(); }

  std::uint16_t port() const { return bound_port(listener_); }

  void await_joins(const std::vector<std::string>& roster) override {
    const auto deadline = std::chrono::steady_clock::now() + join_timeout_;
    std::size_t joined = 0;
    while (joined < roster.size()) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      pollfd p{listener_.fd(), POLLIN, 0};
      const int ready = left.count() > 0 ? ::poll(&p, 1, static_cast<int>(left.count())) : 0;
      if (ready <= 0) {
        throw ProtocolError("only " + std::to_string(joined) + " of " +
                            std::to_string(roster.size()) + " clients joined before the deadline");
      }
      Socket s(::accept(listener_.fd(), nullptr, nullptr));
      if (!s.valid()) continue;
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      const auto hello = read_frame(s.fd());
      if (!hello || hello->type != MessageType::join) {
        continue;  // not a participant; drop the connection
      }
      const auto& id = hello->client_id;
      if (std::find(roster.begin(), roster.end(), id) == roster.end()) {
        throw ProtocolError("JOIN from client " + id + " not on the roster");
      }
      if (conns_.count(id)) throw ProtocolError("client " + id + " joined twice");
      auto conn = std::make_unique<Connection>();
      conn->socket = std::move(s);
      conns_[id] = std::move(conn);
      ++joined;
    }
    for (auto& [id, conn] : conns_) {
      conn->reader = std::thread([this, id = id, c = conn.get()] { read_loop(id, *c); });
    }
  }

  void send_global(const std::string& client, std::uint64_t round,
                   const ModelWeights& global) override {
    send(client, {MessageType::global_weights, static_cast<std::uint32_t>(round), client,
                  serialize_weights(global)});
  }

  std::vector<ClientUpdate> collect(std::uint64_t round,
                                    const std::vector<std::string>& expected) override {
    std::unique_lock lock(mu_);
    auto complete = [&] {
      for (const auto& c : expected) {
        if (gone_.count(c)) return true;  // cannot complete; stop waiting
        bool have = false;
        for (const auto& u : inbox_) have = have || (u.client_id == c && u.round == round);
        if (!have) return false;
      }
      return true;
    };
    cv_.wait_for(lock, collect_timeout_, complete);
    std::vector<ClientUpdate> out = std::move(inbox_);
    inbox_.clear();
    return out;
  }

  void send_control(const std::string& client, MessageType type, std::uint64_t round) override {
    try {
      send(client, {type, static_cast<std::uint32_t>(round), client, {}});
    } catch (const ProtocolError&) {
      // The peer may already be gone when we abort.
    }
  }

  // Closes every connection; clients see EOF after their last control frame.
  void close() override {
    for (auto& [id, conn] : conns_) conn->socket.shutdown();
    for (auto& [id, conn] : conns_) {
      if (conn->reader.joinable()) conn->reader.join();
    }
    conns_.clear();
  }

 private:
  struct Connection {
    Socket socket;
    std::mutex write_mu;
    std::thread reader;
  };

  void send(const std::string& client, const Message& m) {
    auto it = conns_.find(client);
    if (it == conns_.end()) throw ProtocolError("no connection for client " + client);
    std::lock_guard lock(it->second->write_mu);
    write_frame(it->second->socket.fd(), m);
  }

  void read_loop(const std::string& id, Connection& conn) {
    try {
      while (auto m = read_frame(conn.socket.fd())) {
        if (m->type != MessageType::local_update || m->client_id != id) continue;
        auto body = decode_update_body(m->body);
        std::lock_guard lock(mu_);
        inbox_.push_back({id, m->round, body.n_k, std::move(body.weights), body.mean_loss});
        cv_.notify_all();
      }
    } catch (const Error&) {
      // A broken peer is treated like a disconnect.
    }
    std::lock_guard lock(mu_);
    gone_.insert(id);
    cv_.notify_all();
  }

  Socket listener_;
  std::chrono::milliseconds collect_timeout_;
  std::chrono::milliseconds join_timeout_;
  std::map<std::string, std::unique_ptr<Connection>> conns_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<ClientUpdate> inbox_;
  std::set<std::string> gone_;
};

enum class ClientOutcome { completed, aborted };

struct WireClientResult {
  ClientOutcome outcome = ClientOutcome::completed;
  std::uint64_t rounds_done = 0;
  std::uint64_t abort_round = 0;
  std::optional<ModelWeights> last_global;
};

// Participant loop: JOIN, then for each GLOBAL_WEIGHTS train and answer with
// LOCAL_UPDATE. Returns when the server closes the connection or aborts.
template <class Handler>
WireClientResult run_wire_client(const std::string& host, std::uint16_t port,
                                 const std::string& client_id, Handler&& handle,
                                 std::chrono::milliseconds patience = std::chrono::seconds(30)) {
  auto sock = connect_to(host, port, patience);
  write_frame(sock.fd(), {MessageType::join, 0, client_id, {}});
  WireClientResult result;
  while (auto m = read_frame(sock.fd())) {
    switch (m->type) {
      case MessageType::global_weights: {
        auto global = deserialize_weights(m->body);
        ClientUpdate u = handle(static_cast<std::uint64_t>(m->round), global);
        write_frame(sock.fd(),
                    {MessageType::local_update, m->round, client_id,
                     encode_update_body({u.n_k, u.mean_loss, std::move(u.weights)})});
        result.last_global = std::move(global);
        break;
      }
      case MessageType::round_done:
        result.rounds_done = m->round + 1ULL;
        break;
      case MessageType::abort:
        result.outcome = ClientOutcome::aborted;
        result.abort_round = m->round;
        return result;
      default:
        throw ProtocolError(std::string("unexpected ") + to_string(m->type) + " from server");
    }
  }
  return result;
}

inline WireClientResult run_wire_client(const std::string& host, std::uint16_t port,
                                        const LocalClient<float>& client,
                                        std::chrono::milliseconds patience = std::chrono::seconds(30)) {
  return run_wire_client(host, port, client.id(),
                         [&](std::uint64_t r, const ModelWeights& g) { return client.handle(r, g); },
                         patience);
}

}  // namespace fedcbmir
