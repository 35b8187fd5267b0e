#include "tbag/recorder.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tbag {

namespace {

constexpr std::size_t kFramePixelHistory = 16;
constexpr Stamp kHistoryKeep = kNanosPerSecond;

template <typename T>
bool append_ordered(std::vector<Stamped<T>>& stream, Stamp stamp, const T& value) {
  if (!stream.empty() && stamp < stream.back().stamp) return false;
  stream.push_back({stamp, value});
  return true;
}

// Drops samples older than keep_from, always retaining the newest sample at
// or before it so a hold value remains available.
template <typename T>
void prune_stream(std::vector<Stamped<T>>& stream, Stamp keep_from) {
  auto it = std::upper_bound(stream.begin(), stream.end(), keep_from,
                             [](Stamp v, const Stamped<T>& s) { return v < s.stamp; });
  if (it == stream.begin()) return;
  stream.erase(stream.begin(), std::prev(it));
}

}  // namespace

std::string episode_dir_name(std::uint64_t episode_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "episode_%06llu", static_cast<unsigned long long>(episode_id));
  return buf;
}

std::optional<SyncResult> synchronize(Stamp tick, Stamp episode_start, const SyncStreams& streams) {
  const auto* state = latest_at_or_before(streams.state, tick);
  const auto* action = latest_at_or_before(streams.action, tick);
  if (!state || !action) return std::nullopt;

  SyncResult out;
  for (std::size_t c = 0; c < kCameraCount; ++c) {
    const auto* frame = latest_at_or_before(streams.frames[c], tick);
    if (!frame) return std::nullopt;
    out.record.frames[c] = frame->value;
  }
  const Stamp offset = tick - episode_start;
  out.record.t = static_cast<double>(offset / kRecordPeriod) / kRecordRateHz;
  out.record.obs = state->value;
  out.record.action = action->value.command;
  out.record.feedback_cause = action->value.feedback_cause;
  out.record.gated = action->value.gated;
  out.stale = tick - state->stamp > kStaleAfter;
  return out;
}

void EpisodeRecorder::ingest_state(Stamp stamp, const ArmPair<ArmJointState>& state) {
  if (!append_ordered(states_, stamp, state)) ++out_of_order_;
}

void EpisodeRecorder::ingest_action(Stamp stamp, const ActionSample& action) {
  if (!append_ordered(actions_, stamp, action)) ++out_of_order_;
}

void EpisodeRecorder::ingest_frame(Stamp stamp, const CameraFrame& frame) {
  if (frame.camera_id >= kCameraCount) return;
  const FrameRef ref{frame.camera_id, frame.frame_index, stamp};
  if (!append_ordered(frame_refs_[frame.camera_id], stamp, ref)) {
    ++out_of_order_;
    return;
  }
  auto& pixels = frame_pixels_[frame.camera_id];
  pixels.emplace_back(frame.frame_index, StoredFrame{frame.width, frame.height, frame.pixels});
  while (pixels.size() > kFramePixelHistory) pixels.pop_front();
}

void EpisodeRecorder::begin(EpisodeManifest manifest, Stamp episode_start, Stamp record_from) {
  if (active_) throw std::logic_error("recorder already has an active episode");
  if (record_from < episode_start) throw std::invalid_argument("record_from precedes episode start");
  active_ = true;
  episode_ = Episode{};
  episode_.manifest = std::move(manifest);
  episode_.manifest.start_stamp = episode_start;
  episode_start_ = episode_start;
  next_k_ = (record_from - episode_start + kRecordPeriod - 1) / kRecordPeriod;
}

void EpisodeRecorder::advance(Stamp now) {
  if (active_) emit_until(now);
  const Stamp latest = states_.empty() ? 0 : states_.back().stamp;
  if (latest > kHistoryKeep) {
    Stamp keep = latest - kHistoryKeep;
    if (active_) keep = std::min(keep, episode_start_ + next_k_ * kRecordPeriod);
    prune(keep);
  }
}

Episode EpisodeRecorder::finish(Stamp stop, std::string status) {
  if (!active_) throw std::logic_error("recorder has no active episode");
  emit_until(stop);
  active_ = false;
  episode_.manifest.status = std::move(status);
  return std::move(episode_);
}

void EpisodeRecorder::emit_until(Stamp limit) {
  SyncStreams streams{states_, actions_, {}};
  for (std::size_t c = 0; c < kCameraCount; ++c) streams.frames[c] = frame_refs_[c];

  for (;;) {
    const Stamp g = episode_start_ + next_k_ * kRecordPeriod;
    if (g >= limit) break;
    ++next_k_;
    auto row = synchronize(g, episode_start_, streams);
    if (!row) {
      ++episode_.manifest.skipped_ticks;
      continue;
    }
    if (row->stale) ++episode_.manifest.stale_records;
    for (const auto& ref : row->record.frames) {
      auto& store = episode_.frames[ref.camera_id];
      if (store.contains(ref.frame_index)) continue;
      const auto& recent = frame_pixels_[ref.camera_id];
      auto it = std::find_if(recent.begin(), recent.end(),
                             [&](const auto& p) { return p.first == ref.frame_index; });
      if (it != recent.end()) store.emplace(ref.frame_index, it->second);
    }
    episode_.records.push_back(row->record);
  }
}

void EpisodeRecorder::prune(Stamp keep_from) {
  prune_stream(states_, keep_from);
  prune_stream(actions_, keep_from);
  for (auto& s : frame_refs_) prune_stream(s, keep_from);
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::GridViolation: return "GridViolation";
    case ViolationKind::NonMonotoneStamp: return "NonMonotoneStamp";
    case ViolationKind::LimitViolation: return "LimitViolation";
    case ViolationKind::DanglingFrame: return "DanglingFrame";
    case ViolationKind::NonFiniteAction: return "NonFiniteAction";
    case ViolationKind::CausalityViolation: return "CausalityViolation";
  }
  return "Unknown";
}

ValidationReport validate_episode(const Episode& episode, const ArmPair<ArmModel>& follower_models) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::size_t i, std::string detail) {
    report.violations.push_back({kind, i, std::move(detail)});
  };

  const auto& recs = episode.records;
  std::array<Stamp, kCameraCount> last_frame_stamp{};
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const double grid = r.t * kRecordRateHz;
    const double k = std::round(grid);
    if (!std::isfinite(r.t) || r.t < 0.0 || std::abs(grid - k) > 1e-6) {
      add(ViolationKind::GridViolation, i, "t is not on the 50 Hz grid");
    } else if (i > 0) {
      const double prev_k = std::round(recs[i - 1].t * kRecordRateHz);
      if (!(r.t > recs[i - 1].t)) {
        add(ViolationKind::NonMonotoneStamp, i, "t does not increase");
      } else if (k - prev_k != 1.0) {
        add(ViolationKind::GridViolation, i, "gap of " + std::to_string(r.t - recs[i - 1].t) + " s");
      }
    }

    for (std::size_t arm = 0; arm < 2; ++arm) {
      if (!within_limits(follower_models[arm], r.obs[arm].joints())) {
        add(ViolationKind::LimitViolation, i,
            std::string(arm == 0 ? "left" : "right") + " observation outside joint limits");
      }
      if (!r.action[arm].finite()) {
        add(ViolationKind::NonFiniteAction, i, std::string(arm == 0 ? "left" : "right") + " action");
      }
    }

    const Stamp record_stamp =
        episode.manifest.start_stamp + static_cast<Stamp>(std::llround(std::max(k, 0.0))) * kRecordPeriod;
    for (std::size_t c = 0; c < kCameraCount; ++c) {
      const auto& ref = r.frames[c];
      auto cam = episode.frames.find(ref.camera_id);
      if (cam == episode.frames.end() || !cam->second.contains(ref.frame_index)) {
        add(ViolationKind::DanglingFrame, i,
            "camera " + std::to_string(ref.camera_id) + " frame " + std::to_string(ref.frame_index));
      }
      if (ref.frame_stamp > record_stamp) {
        add(ViolationKind::CausalityViolation, i, "frame newer than record");
      }
      if (ref.frame_stamp < last_frame_stamp[c]) {
        add(ViolationKind::NonMonotoneStamp, i, "frame stamp decreased");
      }
      last_frame_stamp[c] = ref.frame_stamp;
    }
  }
  return report;
}

}  // namespace tbag
