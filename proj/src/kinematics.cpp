#include "tbag/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tbag {

RigidTransform RigidTransform::from(const Vec3& t, const Quat& q) {
  RigidTransform out;
  out.translation = t;
  out.rotation = q.normalized();
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.translation = translation + rotation * rhs.translation;
  out.rotation = (rotation * rhs.rotation).normalized();
  return out;
}

Vec3 RigidTransform::apply(const Vec3& p) const { return translation + rotation * p; }

bool JointVector::finite() const {
  return std::all_of(angles.begin(), angles.end(), [](double a) { return std::isfinite(a); }) &&
         std::isfinite(gripper);
}

void ArmModel::validate() const {
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    const auto& lim = joint_limits[i];
    if (!(lim.lower < lim.upper)) {
      throw std::invalid_argument(name + ": joint " + std::to_string(i + 1) +
                                  " limit lower must be < upper");
    }
    if (std::abs(links[i].axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument(name + ": joint " + std::to_string(i + 1) +
                                  " axis is not unit length");
    }
    if (std::abs(links[i].fixed.rotation.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument(name + ": link " + std::to_string(i + 1) +
                                  " rotation is not a unit quaternion");
    }
  }
  if (!(gripper_limits.first < gripper_limits.second) || gripper_limits.first < 0.0 ||
      gripper_limits.second > 1.0) {
    throw std::invalid_argument(name + ": gripper limits must satisfy 0 <= closed < open <= 1");
  }
  for (const auto& c : collision_capsules) {
    if (c.link < 0 || c.link >= static_cast<int>(kArmJoints)) {
      throw std::invalid_argument(name + ": capsule link index out of range");
    }
    if (!(c.radius > 0.0)) {
      throw std::invalid_argument(name + ": capsule radius must be > 0");
    }
  }
}

FrameChain forward_kinematics(const ArmModel& model, const JointVector& q) {
  FrameChain frames;
  frames[0] = model.base_pose;
  for (std::size_t k = 0; k < kArmJoints; ++k) {
    const auto& link = model.links[k];
    RigidTransform joint;
    joint.rotation = Quat(Eigen::AngleAxisd(q.angles[k], link.axis));
    frames[k + 1] = frames[k] * link.fixed * joint;
  }
  return frames;
}

Vec3 end_effector_position(const ArmModel& model, const JointVector& q) {
  return forward_kinematics(model, q).back().translation;
}

bool within_limits(const ArmModel& model, const JointVector& q) {
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    const double a = q.angles[i];
    if (!(a >= model.joint_limits[i].lower && a <= model.joint_limits[i].upper)) return false;
  }
  return q.gripper >= model.gripper_limits.first && q.gripper <= model.gripper_limits.second;
}

JointVector clamp_to_limits(const ArmModel& model, const JointVector& q) {
  JointVector out;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    out.angles[i] =
        std::clamp(q.angles[i], model.joint_limits[i].lower, model.joint_limits[i].upper);
  }
  out.gripper = std::clamp(q.gripper, model.gripper_limits.first, model.gripper_limits.second);
  return out;
}

std::vector<WorldCapsule> capsule_poses(const ArmModel& model, const JointVector& q, int owner) {
  const auto frames = forward_kinematics(model, q);
  std::vector<WorldCapsule> out;
  out.reserve(model.collision_capsules.size());
  for (const auto& c : model.collision_capsules) {
    const auto& frame = frames[static_cast<std::size_t>(c.link) + 1];
    out.push_back({frame.apply(c.a), frame.apply(c.b), c.radius, owner, c.link});
  }
  return out;
}

ArmModel default_follower_model(std::string name, const RigidTransform& base_pose) {
  // Link offsets along the parent z axis; they sum to 0.794 m.
  constexpr std::array<double, kArmJoints> offsets{0.080, 0.060, 0.200, 0.060,
                                                   0.200, 0.060, 0.134};
  ArmModel m;
  m.name = std::move(name);
  m.base_pose = base_pose;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    m.links[i].fixed = RigidTransform::from(Vec3(0.0, 0.0, offsets[i]));
    m.links[i].axis = (i % 2 == 0) ? Vec3::UnitZ() : Vec3::UnitY();
    m.joint_limits[i] = {-std::numbers::pi, std::numbers::pi};
  }
  m.joint_limits[3] = {-2.6, 2.6};  // elbow
  m.gripper_limits = {0.0, 1.0};
  m.collision_capsules = {
      {0, Vec3(0, 0, -0.07), Vec3(0, 0, 0.03), 0.05},   // shoulder
      {1, Vec3(0, 0, 0.02), Vec3(0, 0, 0.17), 0.04},    // upper arm
      {3, Vec3(0, 0, 0.05), Vec3(0, 0, 0.17), 0.035},   // forearm
      {5, Vec3(0, 0, 0.05), Vec3(0, 0, 0.16), 0.03},    // wrist + gripper
  };
  return m;
}

ArmModel scaled_model(const ArmModel& model, double scale, std::string name,
                      const RigidTransform& base_pose) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
  ArmModel out = model;
  out.name = std::move(name);
  out.base_pose = base_pose;
  for (auto& link : out.links) link.fixed.translation *= scale;
  for (auto& c : out.collision_capsules) {
    c.a *= scale;
    c.b *= scale;
    c.radius *= scale;
  }
  return out;
}

}  // namespace tbag
