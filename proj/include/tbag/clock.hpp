#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "tbag/messages.hpp"

namespace tbag {

/// Nanoseconds since this process first asked for the time.
Stamp monotonic_now();

void sleep_until_stamp(Stamp stamp);

/// "YYYY-MM-DDTHH:MM:SS.mmmZ" for the current wall clock.
std::string wall_clock_iso8601();

/// Wall-clock label for virtual runs: the Unix epoch offset by `stamp`.
std::string virtual_wall_clock(Stamp stamp);

/// A callback fired at a fixed rate. Tick k happens at stamp
/// start + floor(k * 1e9 / rate_hz); `order` breaks ties between tasks
/// scheduled on the same stamp (lower first).
struct PeriodicTask {
  std::string name;
  double rate_hz = 0.0;
  int order = 0;
  std::function<void(Stamp)> on_tick;
};

Stamp tick_stamp(Stamp start, double rate_hz, std::uint64_t k);

/// Runs the tasks in stamp order on a virtual clock, single-threaded.
/// Stops after the first event at or beyond `until`, or when `done`
/// returns true (checked after every event). Returns the last stamp run.
Stamp run_virtual(std::vector<PeriodicTask>& tasks, Stamp start, Stamp until,
                  const std::function<bool()>& done = {});

/// Runs each task on its own thread paced by the monotonic clock until
/// `stop` becomes true or `until` passes. Ticks receive the actual
/// monotonic time, so stamps carry real scheduling jitter.
void run_realtime(std::vector<PeriodicTask>& tasks, Stamp start, Stamp until,
                  const std::atomic<bool>& stop);

}  // namespace tbag
