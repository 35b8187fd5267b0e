#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tbag {

inline constexpr std::size_t kArmJoints = 7;

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform as translation + unit quaternion. Composition renormalizes.
struct RigidTransform {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  static RigidTransform from(const Vec3& t, const Quat& q = Quat::Identity());

  /// this ∘ rhs: first apply rhs, then this.
  RigidTransform operator*(const RigidTransform& rhs) const;
  Vec3 apply(const Vec3& p) const;
};

/// Joint angles of one 7-DoF arm plus a normalized gripper aperture.
struct JointVector {
  std::array<double, kArmJoints> angles{};
  double gripper = 0.0;

  bool operator==(const JointVector&) const = default;
  bool finite() const;
};

struct LinkSpec {
  RigidTransform fixed;  // from the parent joint frame
  Vec3 axis = Vec3::UnitZ();
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

/// Collision proxy attached to a link. `link` is 0-based: link i moves with
/// joints 1..i+1, i.e. it lives in FK frame i+1.
struct Capsule {
  int link = 0;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

/// Capsule in the rig frame. `owner` tags where it came from (arm index or
/// body = -1) and `link` is the source link (-1 for body proxies).
struct WorldCapsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
  int owner = -1;
  int link = -1;
};

struct ArmModel {
  std::string name;
  std::array<LinkSpec, kArmJoints> links;
  std::array<JointLimit, kArmJoints> joint_limits;
  std::pair<double, double> gripper_limits{0.0, 1.0};  // (closed, open)
  RigidTransform base_pose;
  std::vector<Capsule> collision_capsules;

  /// Throws std::invalid_argument naming the first broken invariant.
  void validate() const;
};

/// base frame followed by one frame per joint; back() is the end-effector.
using FrameChain = std::array<RigidTransform, kArmJoints + 1>;

FrameChain forward_kinematics(const ArmModel& model, const JointVector& q);

/// End-effector position only (rig frame).
Vec3 end_effector_position(const ArmModel& model, const JointVector& q);

bool within_limits(const ArmModel& model, const JointVector& q);
JointVector clamp_to_limits(const ArmModel& model, const JointVector& q);

std::vector<WorldCapsule> capsule_poses(const ArmModel& model, const JointVector& q,
                                        int owner = 0);

/// Desk-scale 7-DoF arm with alternating z/y joint axes and 0.794 m of
/// link length. Not a model of any particular robot.
ArmModel default_follower_model(std::string name, const RigidTransform& base_pose);

/// Uniformly scales link translations and capsule geometry by `scale`.
ArmModel scaled_model(const ArmModel& model, double scale, std::string name,
                      const RigidTransform& base_pose);

}  // namespace tbag
