#include "tbag/teleop.hpp"

#include <cmath>
#include <limits>

#include "tbag/episode_io.hpp"

namespace tbag {

namespace {

constexpr std::size_t kInputQueueCapacity = 256;

Stamp seconds_to_stamp(double s) { return static_cast<Stamp>(std::llround(s * 1e9)); }

}  // namespace

TeleopNode::TeleopNode(Bus& bus, const Rig& rig, TeleopOptions options)
    : rig_(rig),
      collision_rig_(rig.collision_rig()),
      options_(std::move(options)),
      leader_sub_(bus.subscribe(topics::kLeaderJointStates, kInputQueueCapacity)),
      follower_sub_(bus.subscribe(topics::kFollowerJointStates, kInputQueueCapacity)),
      command_pub_(bus, topics::kFollowerJointCommands),
      feedback_pub_(bus, topics::kTeleopFeedback),
      event_pub_(bus, topics::kSessionEvents),
      last_published_(rig.ready_pose),
      last_safe_(rig.ready_pose),
      motion_source_(rig.ready_pose),
      motion_target_(rig.ready_pose) {
  for (int c = 0; c < rig.cameras.count; ++c) {
    camera_subs_.push_back(bus.subscribe(topics::camera_frame(c), kInputQueueCapacity));
  }
  session_.episode_id = options_.first_episode_id > 0 ? options_.first_episode_id - 1 : 0;
}

void TeleopNode::drain_inputs(Stamp now) {
  (void)now;
  for (auto& msg : leader_sub_.drain()) {
    const auto* js = std::get_if<JointStateMsg>(&msg.payload);
    if (!js || js->arms.size() != 2 || msg.stamp < leader_stamp_) continue;
    leader_ = JointPair{js->arms[0].joints(), js->arms[1].joints()};
    leader_stamp_ = msg.stamp;
  }
  for (auto& msg : follower_sub_.drain()) {
    const auto* js = std::get_if<JointStateMsg>(&msg.payload);
    if (!js || js->arms.size() != 2) continue;
    follower_ = JointPair{js->arms[0].joints(), js->arms[1].joints()};
    recorder_.ingest_state(msg.stamp, {js->arms[0], js->arms[1]});
  }
  for (auto& sub : camera_subs_) {
    for (auto& msg : sub.drain()) {
      if (const auto* f = std::get_if<CameraFrame>(&msg.payload)) recorder_.ingest_frame(msg.stamp, *f);
    }
  }
}

bool TeleopNode::followers_at_ready() const {
  if (!follower_) return false;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    if (tracking_error(rig_.ready_pose[arm], (*follower_)[arm]).max_abs >= rig_.gesture.ready_tolerance) {
      return false;
    }
  }
  return true;
}

JointPair TeleopNode::candidate_command(bool leader_live,
                                        ArmPair<std::array<bool, kArmJoints>>& limits_hit) {
  using C = SessionStateCode;
  switch (session_.code) {
    case C::Idle:
    case C::Ready:
    case C::Arming:
      return rig_.ready_pose;
    case C::Transit:
    case C::Stopping:
      return transit_command(motion_source_, motion_target_, session_.progress);
    case C::Following:
    case C::Disarming: {
      if (!leader_live) return last_published_;
      JointPair out;
      for (std::size_t arm = 0; arm < 2; ++arm) {
        const auto& model = rig_.followers[arm];
        const auto& lq = (*leader_)[arm];
        for (std::size_t i = 0; i < kArmJoints; ++i) {
          const double raw = rig_.retarget.sign[i] * lq.angles[i] + rig_.retarget.offset[i];
          limits_hit[arm][i] =
              raw < model.joint_limits[i].lower || raw > model.joint_limits[i].upper;
        }
        out[arm] = retarget(rig_.retarget, model, lq, last_published_[arm]);
      }
      return out;
    }
  }
  return last_published_;
}

void TeleopNode::handle_events(const std::vector<SessionEvent>& events, Stamp now) {
  for (const auto& e : events) {
    if (e.code == SessionEventCode::EpisodeStart) {
      episode_start_ = now;
      motion_source_ = last_published_;
      for (std::size_t arm = 0; arm < 2; ++arm) {
        motion_target_[arm] = retarget(rig_.retarget, rig_.followers[arm], (*leader_)[arm]);
      }
    } else if (e.code == SessionEventCode::EpisodeStop) {
      finish_episode(now, "complete");
      motion_source_ = last_published_;
      motion_target_ = rig_.ready_pose;
    } else if (e.code == SessionEventCode::StateChanged &&
               e.arg == static_cast<std::uint64_t>(SessionStateCode::Following) &&
               !recorder_.active() && episode_start_) {
      EpisodeManifest m;
      m.episode_id = session_.episode_id;
      m.wall_clock_start = options_.wall_clock(*episode_start_);
      m.rig_hash = rig_.hash;
      m.task = options_.labels.task;
      m.location = options_.labels.location;
      m.operator_label = options_.labels.operator_label;
      recorder_.begin(std::move(m), *episode_start_, now);
    }
  }
}

void TeleopNode::finish_episode(Stamp now, const std::string& status) {
  Episode ep;
  if (recorder_.active()) {
    ep = recorder_.finish(now, status);
  } else if (episode_start_) {
    ep.manifest.episode_id = session_.episode_id;
    ep.manifest.wall_clock_start = options_.wall_clock(*episode_start_);
    ep.manifest.rig_hash = rig_.hash;
    ep.manifest.task = options_.labels.task;
    ep.manifest.location = options_.labels.location;
    ep.manifest.operator_label = options_.labels.operator_label;
    ep.manifest.start_stamp = *episode_start_;
    ep.manifest.status = status;
  } else {
    return;
  }
  episode_start_.reset();
  ++stats_.episodes_finished;
  if (!options_.record_root.empty()) written_.push_back(write_episode(ep, options_.record_root));
  if (options_.on_episode) options_.on_episode(ep);
}

void TeleopNode::tick(Stamp now) {
  ++stats_.ticks;
  drain_inputs(now);

  const Stamp timeout = seconds_to_stamp(rig_.leader_timeout);
  const bool leader_live = leader_ && now >= leader_stamp_ && now - leader_stamp_ <= timeout;
  if (!leader_live) ++stats_.leader_stale_ticks;

  // (1) session
  SessionInputs in;
  if (leader_live) {
    in.leader = *leader_;
    for (std::size_t arm = 0; arm < 2; ++arm) {
      in.leader_ee[arm] = end_effector_position(rig_.leaders[arm], in.leader[arm]);
    }
  } else {
    // No live leader: no gesture can be in progress.
    in.leader.left.gripper = in.leader.right.gripper = 1.0;
    in.leader_ee.left = in.leader_ee.right = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  in.followers_at_ready = followers_at_ready();
  auto stepped = step(session_, in, rig_.gesture, now);
  session_ = stepped.state;
  handle_events(stepped.events, now);

  // (2)+(5) candidate command, predictive collision gate, publish
  ArmPair<std::array<bool, kArmJoints>> limits_hit{};
  const JointPair candidate = candidate_command(leader_live, limits_hit);
  const auto report = check_self_collision(collision_rig_, candidate.left, candidate.right,
                                           rig_.safety.margin);
  const auto gate = gate_command(report, candidate, last_safe_);
  if (!gate.gated) last_safe_ = candidate;
  last_published_ = gate.command;
  command_pub_.publish(JointCommandMsg{{gate.command.left, gate.command.right}}, now);
  ++stats_.commands_published;
  if (gate.gated) ++stats_.gated_ticks;

  // (3) feedback
  ArmPair<TrackingError> error{};
  if (follower_) {
    for (std::size_t arm = 0; arm < 2; ++arm) error[arm] = tracking_error(candidate[arm], (*follower_)[arm]);
  }
  auto feedback = compute_feedback(error, report, limits_hit, rig_.safety.deadband, rig_.safety.saturation);
  if (!leader_live && is_recording_state(session_.code) && feedback.cause == FeedbackCause::None) {
    feedback.cause = FeedbackCause::TrackingLag;
  }
  feedback_pub_.publish(feedback, now);

  // (4) recording
  recorder_.ingest_action(now, {gate.command, static_cast<std::uint8_t>(feedback.cause), gate.gated});
  recorder_.advance(now);

  for (const auto& e : stepped.events) event_pub_.publish(e, now);

  trace_ = {now, session_.code, candidate, gate.command, report, gate.gated, feedback, !leader_live};
}

void TeleopNode::shutdown(Stamp now) {
  if (recorder_.active() || episode_start_) finish_episode(now, "aborted");
}

}  // namespace tbag
