#include "tbag/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tbag/kernels.hpp"

namespace tbag {

void SafetyConfig::validate() const {
  if (!(margin >= 0.0)) throw std::invalid_argument("safety margin must be >= 0");
  if (!(deadband >= 0.0 && deadband < saturation)) {
    throw std::invalid_argument("safety requires 0 <= deadband < saturation");
  }
}

// Closest points between two segments, after Ericson, Real-Time Collision
// Detection, 5.1.9. Handles degenerate (point) segments.
double segment_distance_sq(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  constexpr double eps = 1e-15;
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;

  if (a <= eps && e <= eps) return r.squaredNorm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 c1 = p1 + d1 * s;
  const Vec3 c2 = p2 + d2 * t;
  return (c1 - c2).squaredNorm();
}

double capsule_distance(const WorldCapsule& a, const WorldCapsule& b) {
  // Order the arguments canonically so d(a,b) == d(b,a) bit for bit.
  const auto key = [](const WorldCapsule& c) {
    return std::array<double, 7>{c.a.x(), c.a.y(), c.a.z(), c.b.x(), c.b.y(), c.b.z(), c.radius};
  };
  const bool swap = key(b) < key(a);
  const WorldCapsule& x = swap ? b : a;
  const WorldCapsule& y = swap ? a : b;
  return std::sqrt(segment_distance_sq(x.a, x.b, y.a, y.b)) - (x.radius + y.radius);
}

std::vector<WorldCapsule> rig_capsules(const CollisionRig& rig, const JointPair& q) {
  auto out = capsule_poses(rig.left, q.left, 0);
  auto right = capsule_poses(rig.right, q.right, 1);
  out.insert(out.end(), right.begin(), right.end());
  for (auto c : rig.body) {
    c.owner = kBodyOwner;
    c.link = -1;
    out.push_back(c);
  }
  return out;
}

std::vector<CapsulePairIndex> collision_pairs(const CollisionRig& rig) {
  struct Tag {
    int owner;
    int link;
  };
  std::vector<Tag> tags;
  for (const auto& c : rig.left.collision_capsules) tags.push_back({0, c.link});
  for (const auto& c : rig.right.collision_capsules) tags.push_back({1, c.link});
  for (std::size_t i = 0; i < rig.body.size(); ++i) tags.push_back({kBodyOwner, -1});

  std::vector<CapsulePairIndex> pairs;
  const int n = static_cast<int>(tags.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& ti = tags[static_cast<std::size_t>(i)];
      const auto& tj = tags[static_cast<std::size_t>(j)];
      if (ti.owner == kBodyOwner && tj.owner == kBodyOwner) continue;
      if (ti.owner == tj.owner && std::abs(ti.link - tj.link) < 2) continue;
      pairs.push_back({i, j});
    }
  }
  return pairs;
}

CollisionReport check_self_collision(const CollisionRig& rig, const JointVector& q_left,
                                     const JointVector& q_right, double margin) {
  const auto capsules = rig_capsules(rig, {q_left, q_right});
  const auto pairs = collision_pairs(rig);
  CollisionReport report;
  report.margin = margin;
  report.min_distance = std::numeric_limits<double>::infinity();
  if (pairs.empty()) return report;

  const auto distances = kernels::pair_distances(capsules, pairs);
  const auto best = kernels::argmin(distances);
  report.min_distance = distances[best];
  report.worst_pair = pairs[best];
  report.colliding = report.min_distance < margin;
  return report;
}

GateResult gate_command(const CollisionReport& report, const JointPair& cmd,
                        const JointPair& last_safe) {
  if (report.colliding) return {last_safe, true};
  return {cmd, false};
}

FeedbackSignal compute_feedback(const ArmPair<TrackingError>& error, const CollisionReport& report,
                                const ArmPair<std::array<bool, kArmJoints>>& limits_hit,
                                double deadband, double saturation) {
  FeedbackSignal fb;
  bool any_limit = false;
  bool any_lag = false;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      const double ramp = (std::abs(error[arm].per_joint[i]) - deadband) / (saturation - deadband);
      const double m = std::clamp(ramp, 0.0, 1.0);
      fb.magnitude[arm][i] = m;
      any_lag = any_lag || m > 0.0;
      any_limit = any_limit || limits_hit[arm][i];
    }
  }
  if (report.colliding) {
    fb.cause = FeedbackCause::Collision;
  } else if (any_limit) {
    fb.cause = FeedbackCause::JointLimit;
  } else if (any_lag) {
    fb.cause = FeedbackCause::TrackingLag;
  } else {
    fb.cause = FeedbackCause::None;
    fb.magnitude = {};
  }
  return fb;
}

}  // namespace tbag
