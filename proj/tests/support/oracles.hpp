#pragma once

// Independent reference computations the library is checked against. None
// of these call into the code paths they verify.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tbag/kinematics.hpp"
#include "tbag/messages.hpp"
#include "tbag/simdev.hpp"

namespace oracle {

using Mat4 = Eigen::Matrix4d;
using Mat3 = Eigen::Matrix3d;

/// Rotation matrix of a unit quaternion, written out by hand.
Mat3 quat_matrix(double w, double x, double y, double z);
/// Rodrigues' formula for a unit axis.
Mat3 axis_angle_matrix(const tbag::Vec3& axis, double angle);
Mat4 homogeneous(const Mat3& r, const tbag::Vec3& t);

/// Frames base..end-effector by composing 4x4 homogeneous matrices.
std::array<Mat4, tbag::kArmJoints + 1> fk_homogeneous(const tbag::ArmModel& m, const tbag::JointVector& q);

/// Capsule distance by dense sampling of both axes (n points each).
double capsule_distance_sampled(const tbag::Vec3& a0, const tbag::Vec3& a1, double ra,
                                const tbag::Vec3& b0, const tbag::Vec3& b1, double rb, int n);

/// Index of the last sample with stamp <= t by linear scan, or nullopt.
std::optional<std::size_t> latest_at_or_before(const std::vector<tbag::Stamp>& stamps, tbag::Stamp t);

/// Unsaturated first-order response after k steps: c + (q0 - c)(1 - b dt)^k.
double first_order_response(double q0, double c, double bandwidth, double dt, int k);

/// Piecewise-linear value of (times, values) at t, held at the ends.
double piecewise_linear(const std::vector<double>& times, const std::vector<double>& values, double t);

/// Session lifecycle written as an explicit transition table over
/// (state, guard) pairs. Used to cross-check the library's step function.
class ReferenceFsm {
 public:
  enum class S { Idle, Ready, Arming, Transit, Following, Disarming, Stopping };

  struct Input {
    tbag::Stamp now = 0;
    bool left_grasped = false;
    bool right_grasped = false;
    bool left_in_zone = false;
    bool right_in_zone = false;
    bool followers_at_ready = false;
  };

  struct Event {
    int kind;  // 1 start, 2 stop, 3 state change
    std::uint64_t arg;
    bool operator==(const Event&) const = default;
  };

  ReferenceFsm(tbag::Stamp hold_ns, tbag::Stamp transit_ns) : hold_ns_(hold_ns), transit_ns_(transit_ns) {}

  std::vector<Event> feed(const Input& in);
  S state() const { return s_; }
  std::uint64_t episode() const { return episode_; }

 private:
  tbag::Stamp hold_ns_;
  tbag::Stamp transit_ns_;
  S s_ = S::Idle;
  tbag::Stamp mark_ = 0;
  std::uint64_t episode_ = 0;
};

}  // namespace oracle
