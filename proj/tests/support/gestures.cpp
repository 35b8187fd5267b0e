#include "gestures.hpp"

#include <cmath>

#include "oracles.hpp"

namespace gestures {

using namespace tbag;

GestureConfig config() {
  GestureConfig g;
  g.end_zone = Box::cube(Vec3(0.33, 0, 0.1), 0.3);
  return g;
}

std::vector<Sample> random_trace(std::mt19937_64& rng) {
  std::vector<Sample> out;
  Stamp now = rng() % 1'000'000'000;
  const int segments = 4 + static_cast<int>(rng() % 10);
  for (int s = 0; s < segments; ++s) {
    Sample base{0, rng() % 4 != 0, rng() % 4 != 0, rng() % 3 != 0, rng() % 3 != 0, rng() % 5 != 0};
    if (rng() % 3 == 0) base.lg = base.rg = true;
    const Stamp durations[] = {1'000'000'000, 999'999'999, 1'000'000'001, 992'000'000, 1'008'000'000,
                               2'000'000'000, 300'000'000 + rng() % 1'500'000'000};
    const Stamp duration = durations[rng() % 7];
    const Stamp end = now + duration;
    while (now < end) {
      Sample x = base;
      x.now = now;
      if (rng() % 60 == 0) x.lg = !x.lg;
      if (rng() % 60 == 0) x.rz = !x.rz;
      out.push_back(x);
      const int kind = static_cast<int>(rng() % 10);
      const Stamp dt = kind < 7 ? 8'000'000 : kind < 9 ? 1 + rng() % 20'000'000 : end - now;
      now += std::max<Stamp>(dt, 1);
    }
    Sample x = base;
    x.now = now;
    out.push_back(x);
    now += 1 + rng() % 8'000'000;
  }
  return out;
}

SessionInputs to_inputs(const Sample& s, const GestureConfig& g, std::mt19937_64& rng) {
  const double grasped[] = {0.0, 0.1, g.grasp_threshold};
  const double open[] = {std::nextafter(g.grasp_threshold, 1.0), 0.5, 1.0};
  SessionInputs in;
  in.leader.left.gripper = s.lg ? grasped[rng() % 3] : open[rng() % 3];
  in.leader.right.gripper = s.rg ? grasped[rng() % 3] : open[rng() % 3];
  const Vec3 inside[] = {Vec3(0.33, 0, 0.1), g.end_zone.min, g.end_zone.max, Vec3(0.4, 0.1, 0.0)};
  const Vec3 outside[] = {Vec3(0.0, 0.3, 0.5), g.end_zone.max + Vec3(1e-9, 0, 0), Vec3(0.33, 0.2, 0.1)};
  in.leader_ee.left = s.lz ? inside[rng() % 4] : outside[rng() % 3];
  in.leader_ee.right = s.rz ? inside[rng() % 4] : outside[rng() % 3];
  in.followers_at_ready = s.ready;
  return in;
}


Comparison compare_with_reference(std::uint64_t seed, int traces) {
  const GestureConfig g = config();
  std::mt19937_64 rng(seed);
  Comparison c;
  for (int trace = 0; trace < traces; ++trace) {
    ++c.traces;
    oracle::ReferenceFsm ref(g.hold_nanos(), 2'000'000'000);
    SessionState st;
    for (const auto& s : random_trace(rng)) {
      const auto in = to_inputs(s, g, rng);
      const auto out = step(st, in, g, s.now);
      st = out.state;
      const auto expected = ref.feed({s.now, s.lg, s.rg, s.lz, s.rz, s.ready});
      std::vector<oracle::ReferenceFsm::Event> got;
      for (const auto& e : out.events) {
        got.push_back({static_cast<int>(e.code), e.arg.value_or(~0ULL)});
        c.starts += e.code == SessionEventCode::EpisodeStart;
        c.stops += e.code == SessionEventCode::EpisodeStop;
      }
      if (got != expected || static_cast<int>(st.code) != static_cast<int>(ref.state())) {
        ++c.divergences;
        break;
      }
    }
  }
  return c;
}

}  // namespace gestures
