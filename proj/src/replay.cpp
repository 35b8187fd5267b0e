#include "tbag/replay.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tbag/clock.hpp"

namespace tbag {

namespace {

enum Category { kFrame = 0, kState = 1, kCommand = 2, kFeedback = 3 };

Stamp record_stamp(const EpisodeManifest& m, const EpisodeRecord& r) {
  return m.start_stamp + static_cast<Stamp>(std::llround(r.t * kRecordRateHz)) * kRecordPeriod;
}

// Earliest stamp the replay carries: the first record or an older frame it
// references.
Stamp origin_of(const Episode& ep) {
  if (ep.records.empty()) return ep.manifest.start_stamp;
  Stamp origin = record_stamp(ep.manifest, ep.records.front());
  for (const auto& r : ep.records) {
    for (const auto& f : r.frames) origin = std::min(origin, f.frame_stamp);
  }
  return origin;
}

}  // namespace

std::vector<BusMessage> replay_messages(const Episode& ep, const ReplayOptions& options) {
  if (!(options.speed > 0.0)) throw std::invalid_argument("replay speed must be > 0");
  const Stamp origin = origin_of(ep);
  const Stamp base = options.base.value_or(origin);
  const auto rescale = [&](Stamp s) {
    if (options.speed == 1.0) return base + (s - origin);
    return base + static_cast<Stamp>(std::llround(static_cast<double>(s - origin) / options.speed));
  };

  struct Item {
    Stamp stamp;
    int category;
    std::size_t order;
    BusMessage msg;
  };
  std::vector<Item> items;
  std::size_t order = 0;
  std::map<std::pair<int, std::uint64_t>, bool> sent_frames;

  for (const auto& r : ep.records) {
    const Stamp s = rescale(record_stamp(ep.manifest, r));
    for (const auto& f : r.frames) {
      if (!sent_frames.emplace(std::pair<int, std::uint64_t>{f.camera_id, f.frame_index}, true).second) continue;
      const auto& stored = ep.frames.at(f.camera_id).at(f.frame_index);
      CameraFrame cf{f.camera_id, f.frame_index, stored.width, stored.height, stored.rgb};
      items.push_back({rescale(f.frame_stamp), kFrame, order++,
                       {topics::replay(topics::camera_frame(f.camera_id)), 0, 0, std::move(cf)}});
    }
    items.push_back({s, kState, order++,
                     {topics::replay(topics::kFollowerJointStates), 0, 0, JointStateMsg{{r.obs.left, r.obs.right}}}});
    items.push_back({s, kCommand, order++,
                     {topics::replay(topics::kFollowerJointCommands), 0, 0,
                      JointCommandMsg{{r.action.left, r.action.right}}}});
    FeedbackSignal fb;
    fb.cause = static_cast<FeedbackCause>(r.feedback_cause);
    items.push_back({s, kFeedback, order++, {topics::replay(topics::kTeleopFeedback), 0, 0, fb}});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::tie(a.stamp, a.category, a.order) < std::tie(b.stamp, b.category, b.order);
  });

  std::map<std::string, std::uint64_t> seq;
  std::vector<BusMessage> out;
  out.reserve(items.size());
  for (auto& it : items) {
    it.msg.stamp = it.stamp;
    it.msg.seq = seq[it.msg.topic]++;
    out.push_back(std::move(it.msg));
  }
  return out;
}

ReplayStats replay_episode(const Episode& ep, Bus& bus, const ReplayOptions& options) {
  ReplayOptions opts = options;
  if (opts.pace_realtime && !opts.base) opts.base = monotonic_now();
  const auto msgs = replay_messages(ep, opts);
  ReplayStats stats;
  const auto wall_start = std::chrono::steady_clock::now();
  for (const auto& m : msgs) {
    if (opts.pace_realtime) sleep_until_stamp(m.stamp);
    bus.publish(m);
    ++stats.published;
  }
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  stats.shift = static_cast<std::int64_t>(opts.base.value_or(origin_of(ep))) -
                static_cast<std::int64_t>(origin_of(ep));
  if (!msgs.empty()) {
    stats.first_stamp = msgs.front().stamp;
    stats.last_stamp = msgs.back().stamp;
  }
  return stats;
}

Episode rerecord(const std::vector<BusMessage>& replayed, const EpisodeManifest& manifest,
                 std::int64_t shift) {
  EpisodeRecorder rec;
  // Work on the original timeline so the grid lines up with EpisodeStart.
  const auto original = [shift](Stamp s) {
    return static_cast<Stamp>(static_cast<std::int64_t>(s) - shift);
  };
  const std::string state_topic = topics::replay(topics::kFollowerJointStates);
  const std::string command_topic = topics::replay(topics::kFollowerJointCommands);
  const std::string feedback_topic = topics::replay(topics::kTeleopFeedback);

  std::optional<Stamp> first_state;
  Stamp last_state = 0;
  ArmPair<JointVector> pending{};
  for (const auto& m : replayed) {
    const Stamp stamp = original(m.stamp);
    // Emit as we go; the recorder only keeps a short pixel history.
    if (first_state) rec.advance(stamp);
    if (m.topic == state_topic) {
      const auto& js = std::get<JointStateMsg>(m.payload);
      if (!first_state) rec.begin(manifest, manifest.start_stamp, stamp);
      rec.ingest_state(stamp, {js.arms.at(0), js.arms.at(1)});
      if (!first_state) first_state = stamp;
      last_state = stamp;
    } else if (m.topic == command_topic) {
      const auto& jc = std::get<JointCommandMsg>(m.payload);
      pending = {jc.arms.at(0), jc.arms.at(1)};
    } else if (m.topic == feedback_topic) {
      const auto& fb = std::get<FeedbackSignal>(m.payload);
      rec.ingest_action(stamp, {pending, static_cast<std::uint8_t>(fb.cause),
                                  fb.cause == FeedbackCause::Collision});
    } else if (const auto* f = std::get_if<CameraFrame>(&m.payload)) {
      rec.ingest_frame(stamp, *f);
    }
  }
  if (!first_state) {
    Episode empty;
    empty.manifest = manifest;
    return empty;
  }
  return rec.finish(last_state + 1, manifest.status);
}

}  // namespace tbag
