#include "tbag/retarget.hpp"

#include <cmath>
#include <stdexcept>

namespace tbag {

void RetargetConfig::validate() const {
  for (double s : sign) {
    if (s != 1.0 && s != -1.0) throw std::invalid_argument("retarget sign must be +1 or -1");
  }
  if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0)) {
    throw std::invalid_argument("smoothing_alpha must be in (0, 1]");
  }
}

JointVector retarget(const RetargetConfig& cfg, const ArmModel& follower_model,
                     const JointVector& leader_q, const std::optional<JointVector>& prev_cmd) {
  JointVector raw;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    raw.angles[i] = cfg.sign[i] * leader_q.angles[i] + cfg.offset[i];
  }
  raw.gripper = cfg.gripper_gain * leader_q.gripper + cfg.gripper_bias;

  if (prev_cmd && cfg.smoothing_alpha < 1.0) {
    const double a = cfg.smoothing_alpha;
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      raw.angles[i] = a * raw.angles[i] + (1.0 - a) * prev_cmd->angles[i];
    }
    raw.gripper = a * raw.gripper + (1.0 - a) * prev_cmd->gripper;
  }
  return clamp_to_limits(follower_model, raw);
}

TrackingError tracking_error(const JointVector& cmd, const JointVector& follower_state) {
  TrackingError e;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    e.per_joint[i] = cmd.angles[i] - follower_state.angles[i];
    e.max_abs = std::max(e.max_abs, std::abs(e.per_joint[i]));
  }
  return e;
}

}  // namespace tbag
