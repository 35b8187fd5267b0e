#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "tbag/bus.hpp"
#include "tbag/kinematics.hpp"
#include "tbag/messages.hpp"
#include "tbag/safety.hpp"

namespace tbag {

struct FollowerSimConfig {
  double tracking_bandwidth = 20.0;  // 1/s, first-order pole
  std::array<double, kArmJoints> max_joint_velocity{3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0};  // rad/s
  double max_gripper_velocity = 4.0;  // aperture/s
  double control_rate = 125.0;        // Hz
  double noise_std = 0.0;             // rad, observation noise
  double effort_gain = 10.0;          // effort = gain * (cmd - q')

  void validate() const;
};

/// One integration step of the first-order rate-limited follower:
/// q' = q + clamp(bandwidth * (cmd - q), +-vmax) * dt, then clamped to limits.
/// Velocity is (q' - q) / dt and effort is effort_gain * (cmd - q').
ArmJointState follower_step(const FollowerSimConfig& cfg, const ArmModel& model,
                            const JointVector& state, const JointVector& cmd, double dt);

/// Simulated follower pair: consumes `/follower/joint_commands`, publishes
/// `/follower/joint_states` at the control rate.
class FollowerDevice {
 public:
  FollowerDevice(Bus& bus, const ArmPair<ArmModel>& models, FollowerSimConfig cfg,
                 const JointPair& initial, std::uint64_t seed = 0);

  void tick(Stamp now);
  const JointPair& state() const { return state_; }

 private:
  ArmPair<ArmModel> models_;
  FollowerSimConfig cfg_;
  Subscription commands_;
  Publisher states_;
  JointPair state_;
  JointPair target_;
  std::mt19937_64 rng_;
};

/// Timed waypoints per arm, linearly interpolated.
struct Waypoint {
  double time = 0.0;
  JointVector q;
};

struct LeaderScript {
  ArmPair<std::vector<Waypoint>> arms;
  bool loop = false;

  void validate() const;
  double duration() const;
  JointPair sample(double t) const;

  static LeaderScript from_json_text(const std::string& text);
  static LeaderScript load(const std::filesystem::path& path);
  std::string to_json_text() const;
};

JointVector interpolate(const std::vector<Waypoint>& waypoints, double t);

/// Leader pair publishing `/leader/joint_states`. Sources: a script, external
/// setpoints (UI-driven), or a captured message log replayed verbatim.
class LeaderDevice {
 public:
  static LeaderDevice scripted(Bus& bus, LeaderScript script, Stamp script_start);
  static LeaderDevice external(Bus& bus, const JointPair& initial);
  static LeaderDevice from_log(Bus& bus, std::vector<BusMessage> log);

  void tick(Stamp now);
  /// UI-driven mode only; the value is published unmodified on the next tick.
  void set_setpoint(std::size_t arm, const JointVector& q);
  bool exhausted(Stamp now) const;

 private:
  enum class Mode { Script, External, Log };
  LeaderDevice(Bus& bus, Mode mode);

  Mode mode_;
  Bus* bus_;
  Publisher pub_;
  LeaderScript script_;
  Stamp script_start_ = 0;
  std::optional<JointPair> last_;
  Stamp last_stamp_ = 0;
  std::unique_ptr<std::mutex> setpoint_mu_;
  JointPair setpoint_;
  std::vector<BusMessage> log_;
  std::size_t log_pos_ = 0;
};

/// Deterministic self-describing test pattern for (camera_id, frame_index).
std::vector<std::uint8_t> test_pattern(std::uint8_t camera_id, std::uint64_t frame_index,
                                       std::uint16_t width, std::uint16_t height);

struct PatternId {
  std::uint8_t camera_id;
  std::uint64_t frame_index;
};

std::optional<PatternId> decode_test_pattern(const CameraFrame& frame);

class CameraDevice {
 public:
  CameraDevice(Bus& bus, std::uint8_t camera_id, std::uint16_t width, std::uint16_t height);

  void tick(Stamp now);
  std::uint64_t frames_published() const { return next_index_; }

 private:
  std::uint8_t camera_id_;
  std::uint16_t width_;
  std::uint16_t height_;
  Publisher pub_;
  std::uint64_t next_index_ = 0;
};

}  // namespace tbag
