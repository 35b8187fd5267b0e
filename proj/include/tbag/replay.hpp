#pragma once

#include <optional>
#include <vector>

#include "tbag/bus.hpp"
#include "tbag/recorder.hpp"

namespace tbag {

struct ReplayOptions {
  double speed = 1.0;
  /// Stamp the replay timeline starts at; defaults to the episode's own
  /// earliest stamp, so 1.0x replays carry the original stamps.
  std::optional<Stamp> base;
  /// Sleep until each message's stamp on the monotonic clock.
  bool pace_realtime = false;
};

struct ReplayStats {
  std::size_t published = 0;
  Stamp first_stamp = 0;
  Stamp last_stamp = 0;
  double wall_seconds = 0.0;
  /// Replay stamp minus original stamp (meaningful at speed 1).
  std::int64_t shift = 0;
};

/// The episode as a stamp-ordered message stream on the /replay/... topics:
/// follower joint states and commands plus feedback per record, and each
/// referenced camera frame once at its capture stamp.
std::vector<BusMessage> replay_messages(const Episode& episode, const ReplayOptions& options);

ReplayStats replay_episode(const Episode& episode, Bus& bus, const ReplayOptions& options);

/// Feeds a replayed stream back through a recorder after undoing `shift`
/// (the replay's ReplayStats::shift). At speed 1 the records reproduce the
/// source episode.
Episode rerecord(const std::vector<BusMessage>& replayed, const EpisodeManifest& manifest,
                 std::int64_t shift = 0);

}  // namespace tbag
