#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "tbag/bus.hpp"
#include "tbag/rig.hpp"
#include "tbag/simdev.hpp"
#include "tbag/teleop.hpp"

namespace tbag {

enum class LeaderSource { Script, External, Log };

struct StackOptions {
  bool virtual_clock = true;
  std::uint64_t seed = 0;
  TeleopOptions teleop;
  LeaderSource leader_source = LeaderSource::Script;
  LeaderScript script;               // LeaderSource::Script
  std::vector<BusMessage> leader_log;  // LeaderSource::Log
  /// Followers power up here; defaults to the rig's ready pose.
  std::optional<JointPair> initial_follower;
  /// Hard stop, seconds of stack time. In-flight episodes end as aborted.
  double max_duration = 600.0;
  /// Captures every leader message so the run can be replayed later.
  bool capture_leader = false;
};

struct RunSummary {
  Stamp start = 0;
  Stamp end = 0;
  std::uint64_t episodes = 0;
  bool aborted = false;
  std::vector<std::filesystem::path> written;
};

/// Leader, follower, cameras and the teleop node wired onto one bus.
/// Scripted and log-driven runs end once the leader is exhausted and the
/// session is back at Ready.
class Stack {
 public:
  Stack(const Rig& rig, StackOptions options);
  ~Stack();

  Bus& bus() { return bus_; }
  TeleopNode& teleop() { return *teleop_; }
  LeaderDevice& leader() { return *leader_; }
  FollowerDevice& follower() { return *follower_; }

  RunSummary run();
  /// Thread-safe; makes run() shut down and return.
  void request_stop() { stop_.store(true); }

  /// Leader messages seen so far (requires capture_leader).
  std::vector<BusMessage> captured_leader();

 private:
  bool finished(Stamp now);

  const Rig& rig_;
  StackOptions options_;
  Bus bus_;
  std::unique_ptr<LeaderDevice> leader_;
  std::unique_ptr<FollowerDevice> follower_;
  std::vector<std::unique_ptr<CameraDevice>> cameras_;
  std::unique_ptr<TeleopNode> teleop_;
  std::optional<Subscription> capture_;
  std::vector<BusMessage> captured_;
  std::atomic<bool> stop_{false};
  Stamp start_ = 0;
};

/// Concatenated wire frames, the on-disk form of a captured message log.
void write_message_log(const std::filesystem::path& path, const std::vector<BusMessage>& messages);
std::vector<BusMessage> read_message_log(const std::filesystem::path& path);

}  // namespace tbag
