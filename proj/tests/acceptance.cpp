// Acceptance checks. Prints one PASS/FAIL line per item and exits non-zero
// if any item fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "gestures.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"
#include "tbag/analyze.hpp"
#include "tbag/episode_io.hpp"
#include "tbag/recorder.hpp"
#include "tbag/safety.hpp"
#include "tbag/stack.hpp"

using namespace tbag;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rate_of(const std::vector<Stamp>& stamps) {
  if (stamps.size() < 2) return 0.0;
  return static_cast<double>(stamps.size() - 1) / (static_cast<double>(stamps.back() - stamps.front()) / 1e9);
}

// A run whose single episode records `span` seconds.
LeaderScript ten_second_script(const Rig& rig, double span) {
  scenario::ScriptBuilder b(rig.ready_pose);
  b.hold(0.2).grip(0.0).hold(1.2).grip(1.0);
  b.hold(rig.gesture.transit_duration - 0.2 > 0 ? rig.gesture.transit_duration - 0.2 : 0.1);
  b.move_to(scenario::end_zone_pose(), 1.0);
  b.hold(0.2 + span + rig.gesture.transit_duration - b.now());
  b.grip(0.0).hold(1.05).grip(1.0);
  b.move_to(rig.ready_pose, 0.3).hold(0.1);
  return b.build();
}

struct RateRun {
  double wall = 0;
  std::size_t episodes = 0;
  std::size_t records = 0;
  double joint_rate = 0;
  double camera_rate_min = 1e9;
  double camera_rate_max = 0;
};

RateRun rate_run(const Rig& rig, bool virtual_clock) {
  StackOptions o;
  o.virtual_clock = virtual_clock;
  o.script = ten_second_script(rig, 10.0);
  RateRun out;
  std::vector<Episode> eps;
  o.teleop.on_episode = [&](const Episode& e) { eps.push_back(e); };
  Stack stack(rig, o);
  auto states = stack.bus().subscribe(topics::kFollowerJointStates, 1 << 16);
  std::vector<Subscription> cams;
  for (int c = 0; c < rig.cameras.count; ++c) cams.push_back(stack.bus().subscribe(topics::camera_frame(c), 1 << 12));
  const auto t0 = std::chrono::steady_clock::now();
  stack.run();
  out.wall = seconds_since(t0);
  auto stamps = [](Subscription& s) {
    std::vector<Stamp> v;
    for (const auto& m : s.drain()) v.push_back(m.stamp);
    return v;
  };
  out.joint_rate = rate_of(stamps(states));
  for (auto& c : cams) {
    const double r = rate_of(stamps(c));
    out.camera_rate_min = std::min(out.camera_rate_min, r);
    out.camera_rate_max = std::max(out.camera_rate_max, r);
  }
  out.episodes = eps.size();
  if (!eps.empty()) out.records = eps[0].records.size();
  return out;
}

Outcome rate_contract() {
  const Rig rig = parse_rig(scenario::rig_text_with({{"transit_duration", "0.6"}}));
  const RateRun v = rate_run(rig, true);
  const RateRun r = rate_run(rig, false);
  auto ok = [](const RateRun& x) {
    return x.episodes == 1 && x.records >= 499 && x.records <= 501 && std::abs(x.joint_rate - 125.0) <= 1.25 &&
           x.camera_rate_min >= 29.0 && x.camera_rate_max <= 31.0;
  };
  Outcome o;
  o.pass = ok(v) && ok(r) && v.wall < 1.0 && r.wall < 15.0;
  o.detail = fmt("virtual %.3fs %zu records, joints %.2f Hz, cameras %.2f-%.2f Hz; real %.2fs %zu records, joints %.2f Hz, cameras %.2f-%.2f Hz",
                 v.wall, v.records, v.joint_rate, v.camera_rate_min, v.camera_rate_max, r.wall, r.records,
                 r.joint_rate, r.camera_rate_min, r.camera_rate_max);
  return o;
}

Outcome gesture_timing() {
  const auto c = gestures::compare_with_reference(2024, 10000);
  return {c.divergences == 0 && c.starts > 0 && c.stops > 0,
          fmt("%zu traces, %zu divergences, %zu starts, %zu stops", c.traces, c.divergences, c.starts, c.stops)};
}

Outcome safety_gating() {
  const Rig rig = default_rig();
  const auto a = scenario::audit_run(rig, scenario::collision_script(rig));
  const bool fed_back = a.first_gated_tick && a.first_collision_feedback_tick &&
                        *a.first_collision_feedback_tick >= *a.first_gated_tick &&
                        *a.first_collision_feedback_tick - *a.first_gated_tick <= 2;
  const long lag = a.first_gated_tick && a.first_collision_feedback_tick
                       ? static_cast<long>(*a.first_collision_feedback_tick - *a.first_gated_tick)
                       : -1;
  return {a.gated_ticks > 0 && a.colliding_commands == 0 && fed_back,
          fmt("%llu commands re-checked, %llu colliding, %llu gated ticks, feedback lag %ld ticks, min distance %.4f m",
              (unsigned long long)a.commands, (unsigned long long)a.colliding_commands,
              (unsigned long long)a.gated_ticks, lag, a.min_command_distance)};
}

JointVector random_q(std::mt19937_64& rng, const ArmModel& m) {
  JointVector q;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    q.angles[i] = std::uniform_real_distribution<double>(m.joint_limits[i].lower, m.joint_limits[i].upper)(rng);
  }
  return q;
}

RigidTransform random_base(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return RigidTransform::from(Vec3(n(rng), n(rng), n(rng)) * 0.3, q.normalized());
}

Outcome kinematics_oracle() {
  std::mt19937_64 rng(4);
  double pos = 0, rot = 0, scaled_pos = 0, scaled_rot = 0;
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform base = random_base(rng);
    const ArmModel m = default_follower_model("f", base);
    const JointVector q = random_q(rng, m);
    const auto frames = forward_kinematics(m, q);
    const auto ref = oracle::fk_homogeneous(m, q);
    const double s = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    const auto scaled = forward_kinematics(scaled_model(m, s, "l", base), q);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const Eigen::Matrix3d r = frames[k].rotation.toRotationMatrix();
      pos = std::max(pos, (frames[k].translation - Vec3(ref[k].block<3, 1>(0, 3))).norm());
      rot = std::max(rot, (r - ref[k].block<3, 3>(0, 0)).norm() / std::sqrt(2.0));
      const Vec3 expected = base.translation + s * (frames[k].translation - base.translation);
      scaled_pos = std::max(scaled_pos, (scaled[k].translation - expected).norm());
      scaled_rot = std::max(scaled_rot, (scaled[k].rotation.toRotationMatrix() - r).norm() / std::sqrt(2.0));
    }
  }
  return {pos < 1e-9 && rot < 1e-9 && scaled_pos < 1e-9 && scaled_rot < 1e-9,
          fmt("1000 configs: max FK error %.2e m / %.2e rad; scaled leader %.2e m / %.2e rad", pos, rot, scaled_pos,
              scaled_rot)};
}

Outcome collision_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> p(-0.3, 0.3), len(0.05, 0.3), rad(0.01, 0.08);
  std::normal_distribution<double> dir(0, 1);
  auto capsule = [&] {
    WorldCapsule c;
    c.a = Vec3(p(rng), p(rng), p(rng));
    c.b = c.a + Vec3(dir(rng), dir(rng), dir(rng)).normalized() * len(rng);
    c.radius = rad(rng);
    return c;
  };
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = capsule();
    const auto b = capsule();
    const double ref = oracle::capsule_distance_sampled(a.a, a.b, a.radius, b.a, b.b, b.radius, 301);
    worst = std::max(worst, std::abs(capsule_distance(a, b) - ref));
  }
  return {worst < 2e-3, fmt("1000 pairs: max |analytic - sampled| = %.2e m", worst)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

Outcome determinism() {
  const Rig rig = default_rig();
  scenario::TempDir tmp("accept-det");
  StackOptions capture;
  capture.script = scenario::multi_episode_script(rig, 2);
  capture.capture_leader = true;
  std::vector<BusMessage> log;
  {
    Stack stack(rig, capture);
    stack.run();
    log = stack.captured_leader();
  }
  write_message_log(tmp.path() / "leader.tlog", log);
  std::array<std::map<std::string, std::string>, 2> trees;
  std::size_t episodes = 0;
  for (int i = 0; i < 2; ++i) {
    StackOptions o;
    o.leader_source = LeaderSource::Log;
    o.leader_log = read_message_log(tmp.path() / "leader.tlog");
    o.teleop.record_root = tmp.path() / ("run" + std::to_string(i));
    o.teleop.wall_clock = [](Stamp s) { return "stamp-" + std::to_string(s); };
    episodes = scenario::run_virtual(rig, o).summary.episodes;
    trees[i] = tree(o.teleop.record_root);
  }
  const bool identical = !trees[0].empty() && trees[0] == trees[1];

  std::mt19937_64 rng(6);
  std::size_t exact = 0;
  for (std::uint64_t id = 0; id < 1000; ++id) {
    const Episode ep = scenario::random_episode(rng, id);
    const fs::path dir = write_episode(ep, tmp.path() / "rt");
    exact += read_episode(dir) == ep;
    fs::remove_all(dir);
  }
  return {identical && episodes == 2 && exact == 1000,
          fmt("log replay: %zu episodes, %zu files, identical=%s; round trip bit-exact %zu/1000", episodes,
              trees[0].size(), identical ? "yes" : "no", exact)};
}

Outcome synchronization_oracle() {
  std::mt19937_64 rng(7);
  std::size_t divergences = 0;
  for (int c = 0; c < 10000; ++c) {
    std::vector<Stamp> stamps;
    std::vector<Stamped<int>> stream;
    Stamp t = rng() % 50'000'000;
    const std::size_t n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      stamps.push_back(t);
      stream.push_back({t, static_cast<int>(i)});
      const int kind = static_cast<int>(rng() % 8);
      t += kind == 0 ? 0 : kind < 6 ? 1 + rng() % 40'000'000 : rng() % 300'000'000;
    }
    const Stamp q = rng() % (stamps.back() + 100'000'000);
    const auto* got = latest_at_or_before<int>(stream, q);
    const auto want = oracle::latest_at_or_before(stamps, q);
    if (static_cast<bool>(got) != want.has_value() || (got && static_cast<std::size_t>(got->value) != *want)) {
      ++divergences;
    }
  }
  return {divergences == 0, fmt("10000 cases, %zu divergences", divergences)};
}

Outcome interaction_analysis() {
  const Rig rig = default_rig();
  scenario::TempDir tmp("accept-analyze");
  const double jx[] = {0.0, 0.006, -0.004, 0.009, -0.008};
  const double jz[] = {0.0, 0.015, -0.01, 0.02, 0.005};
  double worst_point = 0;
  std::vector<InteractionPoint> points;
  for (const auto& [label, x0] : {std::pair{"A", 0.38}, std::pair{"B", 0.48}}) {
    std::vector<scenario::Handover> hs;
    for (int i = 0; i < 5; ++i) hs.push_back(scenario::handover_pose(rig, x0 + jx[i], 0.12 + jz[i], 0.12));
    StackOptions o;
    o.script = scenario::handover_script(rig, hs);
    o.teleop.labels.location = label;
    o.teleop.record_root = tmp.path();
    o.teleop.first_episode_id = label[0] == 'A' ? 1 : 101;
    const auto run = scenario::run_virtual(rig, o);
    if (run.summary.written.size() != hs.size()) return {false, fmt("group %s wrote %zu episodes", label, run.summary.written.size())};
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto p = interaction_point(read_episode(run.summary.written[i]), rig.followers, 0.15);
      worst_point = std::max(worst_point, (p.point - hs[i].midpoint).norm());
      points.push_back(p);
    }
  }
  const auto stats = group_statistics(points);
  if (stats.size() != 2) return {false, "expected two groups"};
  const double sep = (stats[1].mean - stats[0].mean).norm();
  return {std::abs(sep - 0.1) <= 1e-3,
          fmt("group means A (%.4f, %.4f, %.4f) B (%.4f, %.4f, %.4f), separation %.6f m; max point error %.2e m",
              stats[0].mean.x(), stats[0].mean.y(), stats[0].mean.z(), stats[1].mean.x(), stats[1].mean.y(),
              stats[1].mean.z(), sep, worst_point)};
}

Outcome end_to_end_validation() {
  const Rig rig = default_rig();
  scenario::TempDir tmp("accept-validate");
  StackOptions o;
  o.script = scenario::multi_episode_script(rig, 20);
  o.teleop.record_root = tmp.path() / "clean";
  const auto run = scenario::run_virtual(rig, o);
  std::size_t clean = 0;
  for (const auto& dir : find_episodes(o.teleop.record_root)) clean += validate_episode(read_episode(dir), rig.followers).clean();

  const Episode base = read_episode(run.summary.written.at(3));
  using Plant = std::function<void(Episode&)>;
  const std::vector<std::pair<ViolationKind, Plant>> plants = {
      {ViolationKind::GridViolation, [](Episode& e) { e.records[10].t += 0.005; }},
      {ViolationKind::NonMonotoneStamp,
       [](Episode& e) { e.records[12].frames[0].frame_stamp = e.records[11].frames[0].frame_stamp - 1; }},
      {ViolationKind::LimitViolation, [](Episode& e) { e.records[20].obs.left.position[3] = 3.0; }},
      {ViolationKind::DanglingFrame, [](Episode& e) { e.records[30].frames[1].frame_index = 999999; }},
      {ViolationKind::NonFiniteAction, [](Episode& e) { e.records[40].action.right.angles[0] = std::nan(""); }},
      {ViolationKind::CausalityViolation,
       [](Episode& e) { e.records.back().frames[2].frame_stamp = e.manifest.start_stamp + 1000 * kRecordPeriod; }},
  };
  std::size_t caught = 0;
  std::string missed;
  for (std::size_t i = 0; i < plants.size(); ++i) {
    Episode bad = base;
    bad.manifest.episode_id = 900 + i;
    plants[i].second(bad);
    const auto report = validate_episode(read_episode(write_episode(bad, tmp.path() / "corrupt")), rig.followers);
    bool found = false;
    for (const auto& v : report.violations) found |= v.kind == plants[i].first;
    caught += found;
    if (!found) missed += std::string(" ") + to_string(plants[i].first);
  }
  return {run.episodes.size() == 20 && clean == 20 && caught == plants.size(),
          fmt("%zu episodes recorded, %zu clean; %zu/%zu planted defects caught%s", run.episodes.size(), clean, caught,
              plants.size(), missed.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> items = {
      {"rate contract", rate_contract},
      {"gesture timing", gesture_timing},
      {"safety gating", safety_gating},
      {"kinematics oracle", kinematics_oracle},
      {"collision oracle", collision_oracle},
      {"determinism and persistence", determinism},
      {"synchronization oracle", synchronization_oracle},
      {"interaction-point analysis", interaction_analysis},
      {"end-to-end validation", end_to_end_validation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Outcome o;
    try {
      o = items[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, items[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
