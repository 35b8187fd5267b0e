#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbag/messages.hpp"
#include "tbag/safety.hpp"

namespace tbag {

inline constexpr std::size_t kCameraCount = 3;
inline constexpr std::uint32_t kRecordRateHz = 50;
inline constexpr Stamp kRecordPeriod = kNanosPerSecond / kRecordRateHz;  // 20 ms
inline constexpr Stamp kStaleAfter = 100'000'000;                         // 100 ms

struct FrameRef {
  std::uint8_t camera_id = 0;
  std::uint64_t frame_index = 0;
  Stamp frame_stamp = 0;
  bool operator==(const FrameRef&) const = default;
};

struct EpisodeRecord {
  double t = 0.0;  // seconds since EpisodeStart, on the 50 Hz grid
  ArmPair<ArmJointState> obs{};
  ArmPair<JointVector> action{};
  std::array<FrameRef, kCameraCount> frames{};
  std::uint8_t feedback_cause = 0;
  bool gated = false;

  bool operator==(const EpisodeRecord&) const = default;
};

struct StoredFrame {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> rgb;
  bool operator==(const StoredFrame&) const = default;
};

struct EpisodeManifest {
  std::uint64_t episode_id = 0;
  std::string wall_clock_start;  // ISO-8601 UTC
  std::string rig_hash;
  std::string task;
  std::string location;
  std::string operator_label;
  Stamp start_stamp = 0;  // monotonic stamp of EpisodeStart
  std::string status = "complete";  // complete | aborted
  std::uint64_t stale_records = 0;
  std::uint64_t skipped_ticks = 0;

  bool operator==(const EpisodeManifest&) const = default;
};

using FrameStore = std::map<std::uint8_t, std::map<std::uint64_t, StoredFrame>>;

struct Episode {
  EpisodeManifest manifest;
  std::vector<EpisodeRecord> records;
  FrameStore frames;

  bool operator==(const Episode&) const = default;
};

/// Directory name for an episode id, e.g. "episode_000042".
std::string episode_dir_name(std::uint64_t episode_id);

template <typename T>
struct Stamped {
  Stamp stamp = 0;
  T value{};
};

/// Zero-order hold: the sample with the greatest stamp <= t, or null.
/// `stream` must be sorted by stamp.
template <typename T>
const Stamped<T>* latest_at_or_before(std::span<const Stamped<T>> stream, Stamp t) {
  auto it = std::upper_bound(stream.begin(), stream.end(), t,
                             [](Stamp v, const Stamped<T>& s) { return v < s.stamp; });
  if (it == stream.begin()) return nullptr;
  return &*std::prev(it);
}

struct ActionSample {
  ArmPair<JointVector> command{};
  std::uint8_t feedback_cause = 0;
  bool gated = false;
};

struct SyncStreams {
  std::span<const Stamped<ArmPair<ArmJointState>>> state;
  std::span<const Stamped<ActionSample>> action;
  std::array<std::span<const Stamped<FrameRef>>, kCameraCount> frames;
};

struct SyncResult {
  EpisodeRecord record;
  bool stale = false;  // newest joint state older than kStaleAfter
};

/// One synchronized row at `tick` (a grid stamp). Returns nullopt if any
/// stream has no sample at or before the tick.
std::optional<SyncResult> synchronize(Stamp tick, Stamp episode_start, const SyncStreams& streams);

/// Buffers the input streams and emits grid-aligned records for the active
/// episode. Ingest order per stream must be stamp-ordered; out-of-order
/// samples are discarded and counted.
class EpisodeRecorder {
 public:
  void ingest_state(Stamp stamp, const ArmPair<ArmJointState>& state);
  void ingest_action(Stamp stamp, const ActionSample& action);
  void ingest_frame(Stamp stamp, const CameraFrame& frame);

  /// Starts an episode whose grid is anchored at `episode_start`; records are
  /// produced for grid stamps >= `record_from`.
  void begin(EpisodeManifest manifest, Stamp episode_start, Stamp record_from);
  /// Emits records for grid stamps strictly before `now`.
  void advance(Stamp now);
  /// Emits the remaining records before `stop` and returns the episode.
  Episode finish(Stamp stop, std::string status = "complete");

  bool active() const { return active_; }
  std::size_t record_count() const { return episode_.records.size(); }
  std::uint64_t out_of_order_samples() const { return out_of_order_; }

 private:
  void emit_until(Stamp limit);
  void prune(Stamp keep_from);

  std::vector<Stamped<ArmPair<ArmJointState>>> states_;
  std::vector<Stamped<ActionSample>> actions_;
  std::array<std::vector<Stamped<FrameRef>>, kCameraCount> frame_refs_;
  std::array<std::deque<std::pair<std::uint64_t, StoredFrame>>, kCameraCount> frame_pixels_;

  bool active_ = false;
  Episode episode_;
  Stamp episode_start_ = 0;
  std::uint64_t next_k_ = 0;
  std::uint64_t out_of_order_ = 0;
};

enum class ViolationKind {
  GridViolation,
  NonMonotoneStamp,
  LimitViolation,
  DanglingFrame,
  NonFiniteAction,
  CausalityViolation,
};

const char* to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::size_t index;  // record index
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool clean() const { return violations.empty(); }
};

ValidationReport validate_episode(const Episode& episode, const ArmPair<ArmModel>& follower_models);

}  // namespace tbag
