#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "tbag/kinematics.hpp"
#include "tbag/messages.hpp"
#include "tbag/safety.hpp"

namespace tbag {

enum class SessionStateCode : std::uint8_t {
  Idle = 0,
  Ready = 1,
  Arming = 2,
  Transit = 3,
  Following = 4,
  Disarming = 5,
  Stopping = 6,
};

std::string_view to_string(SessionStateCode code);

struct SessionState {
  SessionStateCode code = SessionStateCode::Idle;
  Stamp held_since = 0;     // Arming, Disarming
  Stamp motion_start = 0;   // Transit, Stopping
  double progress = 0.0;    // Transit, Stopping: fraction of transit_duration elapsed
  std::uint64_t episode_id = 0;  // current (Transit..Stopping) or last finished episode

  bool operator==(const SessionState&) const = default;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  static Box cube(const Vec3& center, double edge);
  bool contains(const Vec3& p) const;
  bool degenerate() const;
};

struct GestureConfig {
  double grasp_threshold = 0.2;
  double hold_duration = 1.0;   // seconds
  Box end_zone;
  double transit_duration = 2.0;  // seconds
  double ready_tolerance = 0.02;  // rad, max joint error that counts as "at ready pose"

  void validate() const;
  Stamp hold_nanos() const;
};

struct SessionInputs {
  JointPair leader;
  ArmPair<Vec3> leader_ee;
  bool followers_at_ready = false;
};

struct SessionStep {
  SessionState state;
  std::vector<SessionEvent> events;
};

bool is_grasped(const JointVector& leader, const GestureConfig& cfg);

/// Total transition function of the collection lifecycle. Pure: timing comes
/// only from `now`, so replaying a stamped input stream is reproducible.
SessionStep step(const SessionState& state, const SessionInputs& in, const GestureConfig& cfg,
                 Stamp now);

/// Minimum-jerk time scaling 6p^5 - 15p^4 + 10p^3.
double min_jerk(double progress);

JointPair transit_command(const JointPair& source, const JointPair& target, double progress);

/// True for states in which recorded data belongs to the current episode.
inline bool is_recording_state(SessionStateCode c) {
  return c == SessionStateCode::Following || c == SessionStateCode::Disarming;
}

}  // namespace tbag
