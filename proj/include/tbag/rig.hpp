#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbag/kinematics.hpp"
#include "tbag/retarget.hpp"
#include "tbag/safety.hpp"
#include "tbag/session.hpp"
#include "tbag/simdev.hpp"

namespace tbag {

struct CameraConfig {
  int count = 3;
  double rate_hz = 30.0;
  std::uint16_t width = 64;
  std::uint16_t height = 48;
};

/// Everything that defines a two-arm setup. Its hash goes into every
/// episode manifest.
struct Rig {
  std::string name = "desk-pair";
  ArmPair<ArmModel> followers;
  ArmPair<ArmModel> leaders;
  double leader_scale = 0.8;
  std::vector<WorldCapsule> body;
  JointPair ready_pose;
  RetargetConfig retarget;
  GestureConfig gesture;
  SafetyConfig safety;
  FollowerSimConfig follower_sim;
  CameraConfig cameras;
  double teleop_rate = 125.0;
  double leader_rate = 125.0;
  double leader_timeout = 0.5;  // seconds without leader data before holding
  std::string record_root = "episodes";
  std::string hash;  // hex SHA-256 of the source text

  CollisionRig collision_rig() const { return {followers.left, followers.right, body}; }
  /// Throws std::invalid_argument describing the first problem.
  void validate() const;
};

/// Rig description parse failure anchored to a line of the source file.
class RigError : public std::runtime_error {
 public:
  RigError(int line, const std::string& key, const std::string& message);
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

/// Built-in desk-scale rig. Also available as text via default_rig_text().
Rig default_rig();
std::string default_rig_text();

Rig parse_rig(const std::string& text);
Rig load_rig(const std::filesystem::path& path);

std::string sha256_hex(std::string_view text);

}  // namespace tbag
