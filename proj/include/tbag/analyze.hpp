#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tbag/recorder.hpp"
#include "tbag/rig.hpp"

namespace tbag {

/// Where the two follower end-effectors came closest in one episode.
struct InteractionPoint {
  std::uint64_t episode_id = 0;
  std::string group;
  Vec3 point = Vec3::Zero();  // midpoint of the pair, rig frame
  double min_distance = 0.0;
  std::size_t record_index = 0;
  double t = 0.0;
};

class NoInteraction : public std::runtime_error {
 public:
  NoInteraction(std::uint64_t episode_id, double min_distance);
  double min_distance() const noexcept { return min_distance_; }

 private:
  double min_distance_;
};

enum class GroupKey { Location, Operator, Task };

std::string group_label(const EpisodeManifest& m, GroupKey key);

/// Midpoint of the end-effectors at their minimum separation. Throws
/// NoInteraction when that separation is not below `threshold`, or the
/// episode has no records.
InteractionPoint interaction_point(const Episode& episode, const ArmPair<ArmModel>& followers,
                                   double threshold, GroupKey key = GroupKey::Location);

struct GroupStats {
  std::string group;
  std::size_t count = 0;
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // sample covariance (n-1)
};

/// Per-group mean and covariance. Order-independent: points are sorted by
/// (group, episode_id) before accumulation, and groups are returned sorted.
std::vector<GroupStats> group_statistics(std::vector<InteractionPoint> points);

void write_points_csv(std::ostream& out, const std::vector<InteractionPoint>& points);
void write_stats_csv(std::ostream& out, const std::vector<GroupStats>& stats);

}  // namespace tbag
