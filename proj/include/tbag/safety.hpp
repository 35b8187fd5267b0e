#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "tbag/kinematics.hpp"
#include "tbag/retarget.hpp"

namespace tbag {

template <typename T>
struct ArmPair {
  T left;
  T right;

  T& operator[](std::size_t i) { return i == 0 ? left : right; }
  const T& operator[](std::size_t i) const { return i == 0 ? left : right; }
  bool operator==(const ArmPair&) const = default;
};

using JointPair = ArmPair<JointVector>;

inline constexpr int kBodyOwner = -1;

/// Follower arms plus static body proxies, all in the rig frame.
struct CollisionRig {
  ArmModel left;
  ArmModel right;
  std::vector<WorldCapsule> body;
};

struct CapsulePairIndex {
  int a = -1;
  int b = -1;
  bool operator==(const CapsulePairIndex&) const = default;
};

struct CollisionReport {
  bool colliding = false;
  double min_distance = 0.0;
  CapsulePairIndex worst_pair;
  double margin = 0.0;
};

enum class FeedbackCause : std::uint8_t { None = 0, Collision = 1, JointLimit = 2, TrackingLag = 3 };

struct FeedbackSignal {
  ArmPair<std::array<double, kArmJoints>> magnitude{};
  FeedbackCause cause = FeedbackCause::None;

  bool operator==(const FeedbackSignal&) const = default;
};

struct SafetyConfig {
  double margin = 0.02;
  double deadband = 0.05;
  double saturation = 0.5;

  void validate() const;
};

/// Segment-segment distance minus both radii; negative means penetration.
double capsule_distance(const WorldCapsule& a, const WorldCapsule& b);

/// Squared distance between closest points of segments [p1,q1] and [p2,q2].
double segment_distance_sq(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2);

/// Capsules of both arms (left first, then right) followed by body proxies.
/// Indices into this list are the capsule ids used in CollisionReport.
std::vector<WorldCapsule> rig_capsules(const CollisionRig& rig, const JointPair& q);

/// Inter-arm pairs, arm-vs-body pairs and non-adjacent intra-arm pairs.
/// Depends only on the rig layout, so callers may cache it.
std::vector<CapsulePairIndex> collision_pairs(const CollisionRig& rig);

CollisionReport check_self_collision(const CollisionRig& rig, const JointVector& q_left,
                                     const JointVector& q_right, double margin);

struct GateResult {
  JointPair command;
  bool gated = false;
};

GateResult gate_command(const CollisionReport& report, const JointPair& cmd,
                        const JointPair& last_safe);

FeedbackSignal compute_feedback(const ArmPair<TrackingError>& error, const CollisionReport& report,
                                const ArmPair<std::array<bool, kArmJoints>>& limits_hit,
                                double deadband, double saturation);

}  // namespace tbag
