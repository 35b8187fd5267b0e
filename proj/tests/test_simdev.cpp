#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tbag/rig.hpp"
#include "tbag/simdev.hpp"

using namespace tbag;

TEST_SUITE("simdev") {
  TEST_CASE("follower follows the closed-form first-order response") {
    const Rig rig = default_rig();
    FollowerSimConfig cfg = rig.follower_sim;
    const double dt = 1.0 / cfg.control_rate;
    JointVector q = rig.ready_pose.left;
    JointVector cmd = q;
    cmd.angles[1] += 0.1;  // bandwidth * 0.1 stays below the velocity cap
    const double q0 = q.angles[1];
    for (int k = 1; k <= 200; ++k) {
      const auto s = follower_step(cfg, rig.followers.left, q, cmd, dt);
      q = s.joints();
      REQUIRE(q.angles[1] == doctest::Approx(oracle::first_order_response(q0, cmd.angles[1], cfg.tracking_bandwidth, dt, k)).epsilon(1e-12));
      CHECK(s.effort[1] == doctest::Approx(cfg.effort_gain * (cmd.angles[1] - q.angles[1])));
    }
  }

  TEST_CASE("large steps saturate at the velocity cap") {
    const Rig rig = default_rig();
    FollowerSimConfig cfg = rig.follower_sim;
    const double dt = 1.0 / cfg.control_rate;
    JointVector q = rig.ready_pose.left;
    JointVector cmd = q;
    cmd.angles[0] = q.angles[0] + 1.0;
    const double q0 = q.angles[0];
    for (int k = 1; k <= 10; ++k) {
      const auto s = follower_step(cfg, rig.followers.left, q, cmd, dt);
      q = s.joints();
      CHECK(s.velocity[0] == doctest::Approx(cfg.max_joint_velocity[0]));
      CHECK(q.angles[0] == doctest::Approx(q0 + k * cfg.max_joint_velocity[0] * dt));
    }
    // Commands beyond the limit stop at the limit.
    cmd.angles[0] = rig.followers.left.joint_limits[0].upper + 5.0;
    for (int k = 0; k < 2000; ++k) q = follower_step(cfg, rig.followers.left, q, cmd, dt).joints();
    CHECK(q.angles[0] == rig.followers.left.joint_limits[0].upper);
    CHECK_THROWS_AS(follower_step(cfg, rig.followers.left, q, cmd, 0.0), std::invalid_argument);
  }

  TEST_CASE("sim config validation") {
    FollowerSimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.tracking_bandwidth = 500;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_joint_velocity[3] = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.noise_std = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("waypoint interpolation matches a piecewise-linear oracle") {
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int c = 0; c < 200; ++c) {
      std::vector<Waypoint> w;
      std::vector<double> times, values;
      double t = u(rng);
      for (int i = 0; i < 6; ++i) {
        Waypoint p;
        p.time = t;
        for (double& a : p.q.angles) a = u(rng);
        p.q.gripper = 0.5 + 0.5 * u(rng);
        w.push_back(p);
        times.push_back(t);
        values.push_back(p.q.angles[4]);
        t += 0.01 + std::abs(u(rng));
      }
      for (int k = 0; k < 50; ++k) {
        const double q = -2.0 + 0.1 * k;
        CHECK(interpolate(w, q).angles[4] == doctest::Approx(oracle::piecewise_linear(times, values, q)));
      }
    }
  }

  TEST_CASE("leader script json round trip and validation") {
    LeaderScript s;
    s.arms.left = {{0.0, {}}, {1.5, {}}};
    s.arms.left[1].q.angles[2] = 0.25;
    s.arms.left[1].q.gripper = 0.3;
    s.arms.right = {{0.0, {}}};
    const auto back = LeaderScript::from_json_text(s.to_json_text());
    CHECK(back.arms.left.size() == 2);
    CHECK(back.arms.left[1].q.angles[2] == 0.25);
    CHECK(back.arms.left[1].q.gripper == 0.3);
    CHECK(back.duration() == 1.5);
    CHECK(back.sample(0.75).left.angles[2] == doctest::Approx(0.125));
    CHECK_THROWS_AS(LeaderScript::from_json_text("{\"left\": [], \"right\": []}"), std::invalid_argument);
    CHECK_THROWS_AS(LeaderScript::from_json_text(
                        R"({"left":[{"t":1,"angles":[0,0,0,0,0,0,0],"gripper":1},{"t":1,"angles":[0,0,0,0,0,0,0],"gripper":1}],"right":[{"t":0,"angles":[0,0,0,0,0,0,0],"gripper":1}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(LeaderScript::from_json_text(R"({"left":[{"t":0,"angles":[0,0],"gripper":1}],"right":[]})"),
                    std::invalid_argument);
    CHECK_THROWS(LeaderScript::from_json_text("not json"));
  }

  TEST_CASE("test pattern encodes camera and frame index") {
    for (std::uint8_t cam = 0; cam < 3; ++cam) {
      for (std::uint64_t idx : {0ull, 1ull, 255ull, 256ull, 123456789ull}) {
        CameraFrame f{cam, idx, 64, 48, test_pattern(cam, idx, 64, 48)};
        CHECK(f.pixels.size() == 64u * 48u * 3u);
        const auto id = decode_test_pattern(f);
        REQUIRE(id);
        CHECK(id->camera_id == cam);
        CHECK(id->frame_index == idx);
      }
    }
    CameraFrame bad{0, 0, 64, 48, test_pattern(0, 7, 64, 48)};
    bad.pixels[3 * 3 + 1] ^= 0xFF;
    CHECK_FALSE(decode_test_pattern(bad));
  }

  TEST_CASE("devices publish on their topics") {
    Bus bus;
    auto states = bus.subscribe(topics::kFollowerJointStates, 16);
    auto frames = bus.subscribe(topics::camera_frame(2), 16);
    auto leader = bus.subscribe(topics::kLeaderJointStates, 16);
    const Rig rig = default_rig();
    FollowerDevice follower(bus, rig.followers, rig.follower_sim, rig.ready_pose);
    CameraDevice cam(bus, 2, 8, 6);
    LeaderScript s;
    s.arms.left = {{0.0, rig.ready_pose.left}};
    s.arms.right = {{0.0, rig.ready_pose.right}};
    auto lead = LeaderDevice::scripted(bus, s, 1000);
    follower.tick(1000);
    cam.tick(1000);
    cam.tick(2000);
    lead.tick(1000);
    auto st = states.drain();
    REQUIRE(st.size() == 1);
    CHECK(std::get<JointStateMsg>(st[0].payload).arms.size() == 2);
    auto fr = frames.drain();
    REQUIRE(fr.size() == 2);
    CHECK(std::get<CameraFrame>(fr[1].payload).frame_index == 1);
    CHECK(fr[1].seq == 1);
    CHECK(leader.drain().size() == 1);
    CHECK(cam.frames_published() == 2);
  }

  TEST_CASE("external leader publishes the setpoint unmodified") {
    Bus bus;
    auto leader = bus.subscribe(topics::kLeaderJointStates, 16);
    const Rig rig = default_rig();
    auto lead = LeaderDevice::external(bus, rig.ready_pose);
    JointVector q = rig.ready_pose.right;
    q.angles[5] = 0.123456789;
    lead.set_setpoint(1, q);
    lead.tick(5);
    auto m = leader.drain();
    REQUIRE(m.size() == 1);
    const auto& arms = std::get<JointStateMsg>(m[0].payload).arms;
    CHECK(arms[1].position[5] == 0.123456789);
    CHECK(arms[0].joints() == rig.ready_pose.left);
  }
}
