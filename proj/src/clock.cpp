#include "tbag/clock.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <thread>

namespace tbag {

namespace {

const std::chrono::steady_clock::time_point& process_epoch() {
  static const auto epoch = std::chrono::steady_clock::now();
  return epoch;
}

std::string format_utc(std::time_t secs, long millis) {
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

}  // namespace

Stamp monotonic_now() {
  const auto d = std::chrono::steady_clock::now() - process_epoch();
  return static_cast<Stamp>(std::chrono::duration_cast<std::chrono::nanoseconds>(d).count());
}

void sleep_until_stamp(Stamp stamp) {
  std::this_thread::sleep_until(process_epoch() + std::chrono::nanoseconds(stamp));
}

std::string wall_clock_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  return format_utc(static_cast<std::time_t>(ms / 1000), static_cast<long>(ms % 1000));
}

std::string virtual_wall_clock(Stamp stamp) {
  return format_utc(static_cast<std::time_t>(stamp / kNanosPerSecond),
                    static_cast<long>((stamp % kNanosPerSecond) / 1'000'000));
}

Stamp tick_stamp(Stamp start, double rate_hz, std::uint64_t k) {
  // Integer rates give exact stamps (k * 1e9 / rate); others fall back to double.
  const double rounded = std::round(rate_hz);
  if (rounded == rate_hz && rounded > 0) {
    const auto r = static_cast<std::uint64_t>(rounded);
    return start + (k * kNanosPerSecond) / r;
  }
  return start + static_cast<Stamp>(std::floor(static_cast<double>(k) * 1e9 / rate_hz));
}

Stamp run_virtual(std::vector<PeriodicTask>& tasks, Stamp start, Stamp until,
                  const std::function<bool()>& done) {
  std::vector<std::uint64_t> next_k(tasks.size(), 0);
  Stamp last = start;
  for (;;) {
    std::size_t best = tasks.size();
    Stamp best_stamp = std::numeric_limits<Stamp>::max();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const Stamp s = tick_stamp(start, tasks[i].rate_hz, next_k[i]);
      if (s < best_stamp || (s == best_stamp && best < tasks.size() && tasks[i].order < tasks[best].order)) {
        best = i;
        best_stamp = s;
      }
    }
    if (best == tasks.size() || best_stamp > until) return last;
    ++next_k[best];
    last = best_stamp;
    tasks[best].on_tick(best_stamp);
    if (done && done()) return last;
  }
}

void run_realtime(std::vector<PeriodicTask>& tasks, Stamp start, Stamp until,
                  const std::atomic<bool>& stop) {
  std::vector<std::thread> threads;
  threads.reserve(tasks.size());
  for (auto& task : tasks) {
    threads.emplace_back([&task, start, until, &stop] {
      for (std::uint64_t k = 0;; ++k) {
        const Stamp s = tick_stamp(start, task.rate_hz, k);
        if (s > until || stop.load()) return;
        sleep_until_stamp(s);
        if (stop.load()) return;
        task.on_tick(monotonic_now());
      }
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace tbag
