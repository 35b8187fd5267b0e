#include "tbag/stack.hpp"

#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include "tbag/clock.hpp"
#include "tbag/wire.hpp"

namespace tbag {

namespace {

// Tie-break order for events sharing a stamp: inputs first, then the
// control node, then the devices it drives.
enum TaskOrder { kLeaderOrder = 0, kTeleopOrder = 1, kFollowerOrder = 2, kCameraOrder = 3 };

}  // namespace

Stack::Stack(const Rig& rig, StackOptions options) : rig_(rig), options_(std::move(options)) {
  start_ = options_.virtual_clock ? 0 : monotonic_now();
  if (options_.capture_leader) capture_ = bus_.subscribe(topics::kLeaderJointStates, 1u << 22);

  switch (options_.leader_source) {
    case LeaderSource::Script:
      leader_ = std::make_unique<LeaderDevice>(LeaderDevice::scripted(bus_, options_.script, start_));
      break;
    case LeaderSource::External:
      leader_ = std::make_unique<LeaderDevice>(LeaderDevice::external(bus_, rig.ready_pose));
      break;
    case LeaderSource::Log: {
      auto log = options_.leader_log;
      if (!options_.virtual_clock && !log.empty()) {
        // Shift the capture onto this run's clock, keeping relative timing.
        const Stamp first = log.front().stamp;
        for (auto& m : log) m.stamp = m.stamp - first + start_;
      }
      leader_ = std::make_unique<LeaderDevice>(LeaderDevice::from_log(bus_, std::move(log)));
      break;
    }
  }
  follower_ = std::make_unique<FollowerDevice>(
      bus_, rig.followers, rig.follower_sim, options_.initial_follower.value_or(rig.ready_pose),
      options_.seed);
  for (int c = 0; c < rig.cameras.count; ++c) {
    cameras_.push_back(std::make_unique<CameraDevice>(bus_, static_cast<std::uint8_t>(c),
                                                      rig.cameras.width, rig.cameras.height));
  }
  if (options_.virtual_clock) options_.teleop.wall_clock = virtual_wall_clock;
  teleop_ = std::make_unique<TeleopNode>(bus_, rig, options_.teleop);
}

Stack::~Stack() = default;

bool Stack::finished(Stamp now) {
  if (stop_.load()) return true;
  if (options_.leader_source == LeaderSource::External) return false;
  return leader_->exhausted(now) && teleop_->session().code == SessionStateCode::Ready;
}

RunSummary Stack::run() {
  // The teleop node and the devices share nothing but the bus; in real-time
  // mode each runs on its own thread. The done-check reads session state, so
  // it is serialized with the teleop tick.
  std::mutex teleop_mu;
  std::atomic<bool> done{false};
  Stamp last = start_;

  std::vector<PeriodicTask> tasks;
  tasks.push_back({"leader", rig_.leader_rate, kLeaderOrder, [this](Stamp t) { leader_->tick(t); }});
  tasks.push_back({"teleop", rig_.teleop_rate, kTeleopOrder, [&, this](Stamp t) {
                     std::lock_guard lock(teleop_mu);
                     teleop_->tick(t);
                     last = t;
                     if (finished(t)) done.store(true);
                   }});
  tasks.push_back({"follower", rig_.follower_sim.control_rate, kFollowerOrder,
                   [this](Stamp t) { follower_->tick(t); }});
  for (auto& cam : cameras_) {
    auto* c = cam.get();
    tasks.push_back({"camera", rig_.cameras.rate_hz, kCameraOrder, [c](Stamp t) { c->tick(t); }});
  }

  const Stamp until = start_ + static_cast<Stamp>(options_.max_duration * 1e9);
  if (options_.virtual_clock) {
    run_virtual(tasks, start_, until, [&] { return done.load(); });
  } else {
    std::atomic<bool> stop_all{false};
    std::thread watcher([&] {
      while (!done.load() && !stop_all.load()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
      stop_all.store(true);
    });
    run_realtime(tasks, start_, until, stop_all);
    stop_all.store(true);
    watcher.join();
  }

  RunSummary summary;
  {
    std::lock_guard lock(teleop_mu);
    const bool mid_episode = teleop_->session().code != SessionStateCode::Ready &&
                             teleop_->session().code != SessionStateCode::Idle;
    summary.aborted = mid_episode && is_recording_state(teleop_->session().code);
    teleop_->shutdown(last);
    summary.episodes = teleop_->stats().episodes_finished;
    summary.written = teleop_->written();
  }
  summary.start = start_;
  summary.end = last;
  return summary;
}

std::vector<BusMessage> Stack::captured_leader() {
  if (capture_) {
    auto fresh = capture_->drain();
    captured_.insert(captured_.end(), std::make_move_iterator(fresh.begin()),
                     std::make_move_iterator(fresh.end()));
  }
  return captured_;
}

void write_message_log(const std::filesystem::path& path, const std::vector<BusMessage>& messages) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write message log " + path.string());
  for (const auto& m : messages) {
    const auto bytes = wire::encode_frame(m);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

std::vector<BusMessage> read_message_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read message log " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return wire::decode_stream(bytes);
}

}  // namespace tbag
