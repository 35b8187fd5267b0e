#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tbag/kinematics.hpp"
#include "tbag/safety.hpp"

namespace tbag {

/// Monotonic nanoseconds since the process (or virtual) epoch.
using Stamp = std::uint64_t;

inline constexpr Stamp kNanosPerSecond = 1'000'000'000ULL;

struct ArmJointState {
  std::array<double, kArmJoints> position{};
  std::array<double, kArmJoints> velocity{};
  std::array<double, kArmJoints> effort{};
  double gripper = 0.0;

  bool operator==(const ArmJointState&) const = default;

  JointVector joints() const { return {position, gripper}; }
};

struct JointStateMsg {
  std::vector<ArmJointState> arms;
  bool operator==(const JointStateMsg&) const = default;
};

struct JointCommandMsg {
  std::vector<JointVector> arms;
  bool operator==(const JointCommandMsg&) const = default;
};

struct CameraFrame {
  std::uint8_t camera_id = 0;
  std::uint64_t frame_index = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB8, row-major

  bool operator==(const CameraFrame&) const = default;
};

enum class SessionEventCode : std::uint8_t { EpisodeStart = 1, EpisodeStop = 2, StateChanged = 3 };

/// `arg` is the episode id for start/stop and the state code for
/// StateChanged; an absent arg encodes as the bare event code.
struct SessionEvent {
  SessionEventCode code = SessionEventCode::StateChanged;
  std::optional<std::uint64_t> arg;

  bool operator==(const SessionEvent&) const = default;
};

using Payload =
    std::variant<JointStateMsg, JointCommandMsg, FeedbackSignal, CameraFrame, SessionEvent>;

enum class PayloadTag : std::uint8_t {
  JointState = 1,
  JointCommand = 2,
  Feedback = 3,
  CameraFrame = 4,
  SessionEvent = 5,
};

inline PayloadTag payload_tag(const Payload& p) {
  return static_cast<PayloadTag>(p.index() + 1);
}

struct BusMessage {
  std::string topic;
  Stamp stamp = 0;
  std::uint64_t seq = 0;
  Payload payload;

  bool operator==(const BusMessage&) const = default;
};

namespace topics {
inline const std::string kLeaderJointStates = "/leader/joint_states";
inline const std::string kFollowerJointStates = "/follower/joint_states";
inline const std::string kFollowerJointCommands = "/follower/joint_commands";
inline const std::string kTeleopFeedback = "/teleop/feedback";
inline const std::string kSessionEvents = "/session/events";
inline std::string camera_frame(int camera_id) {
  return "/camera/" + std::to_string(camera_id) + "/frame";
}
inline std::string replay(const std::string& topic) { return "/replay" + topic; }
}  // namespace topics

/// Throws std::invalid_argument unless the topic is 1..255 bytes, starts
/// with '/', and has no whitespace.
void validate_topic(const std::string& topic);

}  // namespace tbag
