#include "tbag/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbag {

std::string_view to_string(SessionStateCode code) {
  switch (code) {
    case SessionStateCode::Idle: return "Idle";
    case SessionStateCode::Ready: return "Ready";
    case SessionStateCode::Arming: return "Arming";
    case SessionStateCode::Transit: return "Transit";
    case SessionStateCode::Following: return "Following";
    case SessionStateCode::Disarming: return "Disarming";
    case SessionStateCode::Stopping: return "Stopping";
  }
  return "?";
}

Box Box::cube(const Vec3& center, double edge) {
  const Vec3 h = Vec3::Constant(edge / 2.0);
  return {center - h, center + h};
}

bool Box::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

bool Box::degenerate() const { return !((max.array() > min.array()).all()); }

void GestureConfig::validate() const {
  if (!(hold_duration > 0.0)) throw std::invalid_argument("hold_duration must be > 0");
  if (!(transit_duration > 0.0)) throw std::invalid_argument("transit_duration must be > 0");
  if (end_zone.degenerate()) throw std::invalid_argument("end_zone must be non-degenerate");
  if (!(grasp_threshold >= 0.0 && grasp_threshold <= 1.0)) {
    throw std::invalid_argument("grasp_threshold must be in [0, 1]");
  }
  if (!(ready_tolerance > 0.0)) throw std::invalid_argument("ready_tolerance must be > 0");
}

Stamp GestureConfig::hold_nanos() const {
  return static_cast<Stamp>(std::llround(hold_duration * 1e9));
}

bool is_grasped(const JointVector& leader, const GestureConfig& cfg) {
  return leader.gripper <= cfg.grasp_threshold;
}

namespace {

SessionEvent state_changed(SessionStateCode c) {
  return {SessionEventCode::StateChanged, static_cast<std::uint64_t>(c)};
}

double motion_progress(Stamp start, Stamp now, double duration) {
  const double elapsed = static_cast<double>(now - start) / 1e9;
  return std::clamp(elapsed / duration, 0.0, 1.0);
}

}  // namespace

SessionStep step(const SessionState& state, const SessionInputs& in, const GestureConfig& cfg,
                 Stamp now) {
  using C = SessionStateCode;
  SessionStep out{state, {}};
  auto go = [&](C next) {
    out.state.code = next;
    out.events.push_back(state_changed(next));
  };

  const bool both_grasped = is_grasped(in.leader.left, cfg) && is_grasped(in.leader.right, cfg);
  const bool both_in_zone =
      cfg.end_zone.contains(in.leader_ee.left) && cfg.end_zone.contains(in.leader_ee.right);
  const bool held_long_enough = now >= state.held_since && now - state.held_since >= cfg.hold_nanos();

  switch (state.code) {
    case C::Idle:
      if (in.followers_at_ready) go(C::Ready);
      break;
    case C::Ready:
      if (both_grasped) {
        out.state.held_since = now;
        go(C::Arming);
      }
      break;
    case C::Arming:
      if (!both_grasped) {
        go(C::Ready);
      } else if (held_long_enough) {
        out.state.motion_start = now;
        out.state.progress = 0.0;
        out.state.episode_id = state.episode_id + 1;
        go(C::Transit);
        out.events.push_back({SessionEventCode::EpisodeStart, out.state.episode_id});
      }
      break;
    case C::Transit:
      out.state.progress = motion_progress(state.motion_start, now, cfg.transit_duration);
      if (out.state.progress >= 1.0) go(C::Following);
      break;
    case C::Following:
      if (both_grasped && both_in_zone) {
        out.state.held_since = now;
        go(C::Disarming);
      }
      break;
    case C::Disarming:
      if (!(both_grasped && both_in_zone)) {
        go(C::Following);
      } else if (held_long_enough) {
        out.state.motion_start = now;
        out.state.progress = 0.0;
        go(C::Stopping);
        out.events.push_back({SessionEventCode::EpisodeStop, state.episode_id});
      }
      break;
    case C::Stopping:
      out.state.progress = motion_progress(state.motion_start, now, cfg.transit_duration);
      if (out.state.progress >= 1.0 && in.followers_at_ready) go(C::Ready);
      break;
  }
  return out;
}

double min_jerk(double p) {
  p = std::clamp(p, 0.0, 1.0);
  const double p3 = p * p * p;
  return p3 * (10.0 + p * (-15.0 + 6.0 * p));
}

JointPair transit_command(const JointPair& source, const JointPair& target, double progress) {
  const double s = min_jerk(progress);
  const auto blend = [s](double a, double b) { return (1.0 - s) * a + s * b; };
  JointPair out;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      out[arm].angles[i] = blend(source[arm].angles[i], target[arm].angles[i]);
    }
    out[arm].gripper = blend(source[arm].gripper, target[arm].gripper);
  }
  return out;
}

}  // namespace tbag
