#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tbag/bus.hpp"
#include "tbag/clock.hpp"
#include "tbag/recorder.hpp"
#include "tbag/rig.hpp"
#include "tbag/session.hpp"

namespace tbag {

struct EpisodeLabels {
  std::string task = "unlabeled";
  std::string location = "desk";
  std::string operator_label = "operator";
};

struct TeleopOptions {
  EpisodeLabels labels;
  std::uint64_t first_episode_id = 1;
  /// Where finished episodes are written; empty keeps them in memory only.
  std::filesystem::path record_root;
  /// Produces the manifest wall-clock label for an EpisodeStart stamp.
  std::function<std::string(Stamp)> wall_clock = [](Stamp) { return wall_clock_iso8601(); };
  /// Called with every finished (or aborted) episode.
  std::function<void(const Episode&)> on_episode;
};

struct TeleopStats {
  std::uint64_t ticks = 0;
  std::uint64_t commands_published = 0;
  std::uint64_t gated_ticks = 0;
  std::uint64_t leader_stale_ticks = 0;
  std::uint64_t episodes_finished = 0;
};

/// One tick's decision, kept for inspection by tests and the UI bridge.
struct TickTrace {
  Stamp stamp = 0;
  SessionStateCode state = SessionStateCode::Idle;
  JointPair candidate;
  JointPair published;
  CollisionReport report;
  bool gated = false;
  FeedbackSignal feedback;
  bool leader_stale = true;
};

/// The central node: session FSM, retargeting, collision gating, feedback,
/// and recording, advanced one tick at a time by its owner.
class TeleopNode {
 public:
  TeleopNode(Bus& bus, const Rig& rig, TeleopOptions options = {});

  void tick(Stamp now);
  /// Finalizes an in-flight episode as aborted.
  void shutdown(Stamp now);

  const SessionState& session() const { return session_; }
  const TeleopStats& stats() const { return stats_; }
  const TickTrace& last_tick() const { return trace_; }
  const std::vector<std::filesystem::path>& written() const { return written_; }

 private:
  void drain_inputs(Stamp now);
  void handle_events(const std::vector<SessionEvent>& events, Stamp now);
  void finish_episode(Stamp now, const std::string& status);
  JointPair candidate_command(bool leader_live, ArmPair<std::array<bool, kArmJoints>>& limits_hit);
  bool followers_at_ready() const;

  const Rig& rig_;
  CollisionRig collision_rig_;
  TeleopOptions options_;

  Subscription leader_sub_;
  Subscription follower_sub_;
  std::vector<Subscription> camera_subs_;
  Publisher command_pub_;
  Publisher feedback_pub_;
  Publisher event_pub_;

  SessionState session_;
  std::optional<JointPair> leader_;
  Stamp leader_stamp_ = 0;
  std::optional<JointPair> follower_;
  JointPair last_published_;
  JointPair last_safe_;
  JointPair motion_source_;
  JointPair motion_target_;

  EpisodeRecorder recorder_;
  std::optional<Stamp> episode_start_;

  TeleopStats stats_;
  TickTrace trace_;
  std::vector<std::filesystem::path> written_;
};

}  // namespace tbag
