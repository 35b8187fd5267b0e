#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "tbag/bus.hpp"
#include "tbag/safety.hpp"

namespace tbag::ws {

inline constexpr Stamp kThumbnailPeriod = 100'000'000;  // at most 10 Hz per camera
inline constexpr std::uint16_t kThumbnailMaxWidth = 32;

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Nearest-neighbour downsample by an integer stride so width <= max_width.
CameraFrame thumbnail(const CameraFrame& frame, std::uint16_t max_width = kThumbnailMaxWidth);

/// Per-camera rate limiter for thumbnails.
class ThumbnailThrottle {
 public:
  bool admit(std::uint8_t camera_id, Stamp stamp);

 private:
  std::array<std::optional<Stamp>, 256> last_{};
};

/// `{topic, stamp, seq, payload}` as JSON text. Camera frames become base64
/// thumbnails; frames the throttle rejects yield nullopt.
std::optional<std::string> encode_server_message(const BusMessage& msg, ThumbnailThrottle& throttle);

struct LeaderSet {
  std::size_t arm = 0;
  JointVector q;
};

struct MalformedFrame {
  std::string reason;
};

/// Parses `{type:"leader_set", arm, angles[7], gripper}` and clamps the
/// setpoint to the leader model limits. `arm` is 0/1 or "left"/"right".
std::variant<LeaderSet, MalformedFrame> decode_client_message(std::string_view text,
                                                              const ArmPair<ArmModel>& leaders);

}  // namespace tbag::ws

namespace tbag {

struct BridgeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  /// Served over plain HTTP for non-websocket requests; a placeholder page
  /// is served when empty or missing.
  std::filesystem::path static_root;
};

/// Websocket bridge for the browser console. Mirrors every bus message to
/// connected clients as JSON and turns client leader setpoints into calls of
/// `on_leader_set`.
class WsBridge {
 public:
  using LeaderSink = std::function<void(std::size_t arm, const JointVector& q)>;

  WsBridge(Bus& bus, ArmPair<ArmModel> leaders, LeaderSink on_leader_set, BridgeOptions options);
  ~WsBridge();
  WsBridge(const WsBridge&) = delete;
  WsBridge& operator=(const WsBridge&) = delete;

  std::uint16_t port() const;
  std::size_t client_count() const;
  std::uint64_t malformed_count() const;
  std::uint64_t setpoints_applied() const;
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace tbag
