#include "tbag/analyze.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>

#include "tbag/kernels.hpp"

namespace tbag {

NoInteraction::NoInteraction(std::uint64_t episode_id, double min_distance)
    : std::runtime_error("episode " + std::to_string(episode_id) +
                         ": no interaction (min end-effector distance " +
                         std::to_string(min_distance) + " m)"),
      min_distance_(min_distance) {}

std::string group_label(const EpisodeManifest& m, GroupKey key) {
  switch (key) {
    case GroupKey::Location: return m.location;
    case GroupKey::Operator: return m.operator_label;
    case GroupKey::Task: return m.task;
  }
  return {};
}

InteractionPoint interaction_point(const Episode& episode, const ArmPair<ArmModel>& followers,
                                   double threshold, GroupKey key) {
  const auto& recs = episode.records;
  if (recs.empty()) throw NoInteraction(episode.manifest.episode_id, std::numeric_limits<double>::infinity());

  ArmPair<std::vector<JointVector>> qs;
  for (const auto& r : recs) {
    qs.left.push_back(r.obs.left.joints());
    qs.right.push_back(r.obs.right.joints());
  }
  const auto left = kernels::ee_trajectory_parallel(followers.left, qs.left);
  const auto right = kernels::ee_trajectory_parallel(followers.right, qs.right);
  const auto closest = kernels::closest_approach_parallel(left, right);
  if (!(closest.distance < threshold)) throw NoInteraction(episode.manifest.episode_id, closest.distance);

  InteractionPoint p;
  p.episode_id = episode.manifest.episode_id;
  p.group = group_label(episode.manifest, key);
  p.point = 0.5 * (left[closest.index] + right[closest.index]);
  p.min_distance = closest.distance;
  p.record_index = closest.index;
  p.t = recs[closest.index].t;
  return p;
}

std::vector<GroupStats> group_statistics(std::vector<InteractionPoint> points) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return std::tie(a.group, a.episode_id) < std::tie(b.group, b.episode_id);
  });
  std::map<std::string, std::vector<Vec3>> by_group;
  for (const auto& p : points) by_group[p.group].push_back(p.point);

  std::vector<GroupStats> out;
  for (const auto& [group, pts] : by_group) {
    GroupStats s;
    s.group = group;
    s.count = pts.size();
    for (const auto& v : pts) s.mean += v;
    s.mean /= static_cast<double>(pts.size());
    if (pts.size() > 1) {
      for (const auto& v : pts) {
        const Vec3 d = v - s.mean;
        s.covariance += d * d.transpose();
      }
      s.covariance /= static_cast<double>(pts.size() - 1);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_points_csv(std::ostream& out, const std::vector<InteractionPoint>& points) {
  out << "episode_id,group,x,y,z,min_distance,t\n";
  out << std::setprecision(17);
  for (const auto& p : points) {
    out << p.episode_id << ',' << p.group << ',' << p.point.x() << ',' << p.point.y() << ','
        << p.point.z() << ',' << p.min_distance << ',' << p.t << '\n';
  }
}

void write_stats_csv(std::ostream& out, const std::vector<GroupStats>& stats) {
  out << "group,count,mean_x,mean_y,mean_z,cov_xx,cov_xy,cov_xz,cov_yy,cov_yz,cov_zz\n";
  out << std::setprecision(17);
  for (const auto& s : stats) {
    const auto& c = s.covariance;
    out << s.group << ',' << s.count << ',' << s.mean.x() << ',' << s.mean.y() << ','
        << s.mean.z() << ',' << c(0, 0) << ',' << c(0, 1) << ',' << c(0, 2) << ',' << c(1, 1)
        << ',' << c(1, 2) << ',' << c(2, 2) << '\n';
  }
}

}  // namespace tbag
