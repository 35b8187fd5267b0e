#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "scenarios.hpp"
#include "tbag/analyze.hpp"

using namespace tbag;

namespace {

Episode posed_episode(const Rig& rig, const std::vector<JointPair>& poses, std::uint64_t id = 1) {
  Episode ep;
  ep.manifest.episode_id = id;
  ep.manifest.location = "bench";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EpisodeRecord r;
    r.t = static_cast<double>(i) / kRecordRateHz;
    r.obs.left.position = poses[i].left.angles;
    r.obs.right.position = poses[i].right.angles;
    ep.records.push_back(r);
  }
  (void)rig;
  return ep;
}

InteractionPoint point(std::string group, std::uint64_t id, Vec3 v) {
  InteractionPoint p;
  p.group = std::move(group);
  p.episode_id = id;
  p.point = v;
  return p;
}

}  // namespace

TEST_SUITE("analyze") {
  TEST_CASE("interaction point is the midpoint at closest approach") {
    const Rig rig = default_rig();
    const auto h = scenario::handover_pose(rig, 0.42, 0.15, 0.12);
    std::vector<JointPair> poses(30, rig.ready_pose);
    poses[17] = h.pose;
    const auto p = interaction_point(posed_episode(rig, poses), rig.followers, 0.15);
    CHECK((p.point - h.midpoint).norm() < 1e-9);
    CHECK(p.min_distance == doctest::Approx(0.12).epsilon(1e-9));
    CHECK(p.record_index == 17);
    CHECK(p.t == doctest::Approx(17 / 50.0));
    CHECK(p.group == "bench");
  }

  TEST_CASE("episodes that never come close are rejected") {
    const Rig rig = default_rig();
    std::vector<JointPair> poses(10, rig.ready_pose);
    CHECK_THROWS_AS(interaction_point(posed_episode(rig, poses), rig.followers, 0.15), NoInteraction);
    CHECK_THROWS_AS(interaction_point(posed_episode(rig, {}), rig.followers, 0.15), NoInteraction);
    try {
      interaction_point(posed_episode(rig, poses), rig.followers, 0.15);
    } catch (const NoInteraction& e) {
      const double d = (end_effector_position(rig.followers.left, rig.ready_pose.left) -
                        end_effector_position(rig.followers.right, rig.ready_pose.right)).norm();
      CHECK(e.min_distance() == doctest::Approx(d));
    }
  }

  TEST_CASE("group statistics: mean and n-1 covariance, order independent") {
    std::vector<InteractionPoint> pts = {
        point("a", 1, {0, 0, 0}), point("a", 2, {2, 0, 0}), point("a", 3, {1, 3, 0}),
        point("b", 4, {5, 5, 5}),
    };
    const auto stats = group_statistics(pts);
    REQUIRE(stats.size() == 2);
    CHECK(stats[0].group == "a");
    CHECK(stats[0].count == 3);
    CHECK(stats[0].mean.x() == doctest::Approx(1.0));
    CHECK(stats[0].mean.y() == doctest::Approx(1.0));
    CHECK(stats[0].covariance(0, 0) == doctest::Approx(1.0));   // (1 + 1 + 0) / 2
    CHECK(stats[0].covariance(1, 1) == doctest::Approx(3.0));   // (1 + 1 + 4) / 2
    CHECK(stats[0].covariance(0, 1) == doctest::Approx(0.0));
    CHECK(stats[1].covariance.isZero());

    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<InteractionPoint> many;
    for (std::uint64_t i = 0; i < 200; ++i) many.push_back(point(i % 3 ? "x" : "y", i, {u(rng), u(rng), u(rng)}));
    const auto ref = group_statistics(many);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(many.begin(), many.end(), rng);
      const auto again = group_statistics(many);
      REQUIRE(again.size() == ref.size());
      for (std::size_t g = 0; g < ref.size(); ++g) {
        CHECK(again[g].mean == ref[g].mean);
        CHECK(again[g].covariance == ref[g].covariance);
      }
    }
  }

  TEST_CASE("csv output") {
    std::ostringstream a, b;
    write_points_csv(a, {point("g", 3, {0.5, 0, 0.25})});
    CHECK(a.str().rfind("episode_id,group,x,y,z,min_distance,t\n3,g,0.5,0,0.25,", 0) == 0);
    write_stats_csv(b, group_statistics({point("g", 3, {0.5, 0, 0.25})}));
    CHECK(b.str().find("group,count,mean_x") == 0);
  }

  TEST_CASE("scripted handover lands on the scripted midpoint") {
    const Rig rig = default_rig();
    const auto h = scenario::handover_pose(rig, 0.40, 0.12, 0.12);
    StackOptions o;
    o.script = scenario::handover_script(rig, {h});
    const auto run = scenario::run_virtual(rig, o);
    REQUIRE(run.episodes.size() == 1);
    const auto p = interaction_point(run.episodes[0], rig.followers, 0.15);
    CHECK((p.point - h.midpoint).norm() < 1e-6);
    CHECK(p.min_distance == doctest::Approx(0.12).epsilon(1e-6));
  }
}
