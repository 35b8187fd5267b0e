#pragma once

#include <array>
#include <optional>

#include "tbag/kinematics.hpp"

namespace tbag {

struct RetargetConfig {
  std::array<double, kArmJoints> sign{1, 1, 1, 1, 1, 1, 1};
  std::array<double, kArmJoints> offset{};
  double gripper_gain = 1.0;
  double gripper_bias = 0.0;
  double smoothing_alpha = 1.0;  // 1 = no smoothing

  void validate() const;
};

/// Leader joint state -> follower joint command. Smoothing against
/// `prev_cmd` happens before clamping, so the result is always within the
/// follower limits.
JointVector retarget(const RetargetConfig& cfg, const ArmModel& follower_model,
                     const JointVector& leader_q,
                     const std::optional<JointVector>& prev_cmd = std::nullopt);

struct TrackingError {
  std::array<double, kArmJoints> per_joint{};
  double max_abs = 0.0;
};

TrackingError tracking_error(const JointVector& cmd, const JointVector& follower_state);

}  // namespace tbag
