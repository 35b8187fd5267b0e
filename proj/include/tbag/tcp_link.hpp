#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "tbag/bus.hpp"

namespace tbag {

struct LinkStats {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t send_overflows = 0;
  std::uint64_t connections = 0;  // accepted (server) or established (client)
};

/// Exposes a bus over TCP. Every message published on the local bus is
/// forwarded to every peer; frames from a peer are republished locally and
/// forwarded to the other peers, never echoed back to their source.
class BusServer {
 public:
  /// Port 0 picks a free port. Throws std::system_error if the bind fails.
  BusServer(Bus& bus, const std::string& host, std::uint16_t port);
  ~BusServer();
  BusServer(const BusServer&) = delete;
  BusServer& operator=(const BusServer&) = delete;

  std::uint16_t port() const;
  std::size_t peer_count() const;
  LinkStats stats() const;
  /// Fault injection: closes every open peer connection.
  void drop_peers();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ClientOptions {
  std::chrono::milliseconds reconnect_delay{200};
  bool reconnect = true;
};

/// Connects a local bus to a BusServer. After a connection loss it
/// reconnects and re-subscribes; messages published while disconnected are
/// not replayed.
class BusClient {
 public:
  BusClient(Bus& bus, const std::string& host, std::uint16_t port, ClientOptions options = {});
  ~BusClient();
  BusClient(const BusClient&) = delete;
  BusClient& operator=(const BusClient&) = delete;

  bool connected() const;
  bool wait_connected(std::chrono::milliseconds timeout) const;
  LinkStats stats() const;
  /// Fault injection: closes the current connection.
  void drop_connection();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tbag
