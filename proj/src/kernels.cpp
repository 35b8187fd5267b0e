#include "tbag/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tbag::kernels {

namespace {

double pair_distance(std::span<const WorldCapsule> capsules, const CapsulePairIndex& p) {
  return capsule_distance(capsules[static_cast<std::size_t>(p.a)],
                          capsules[static_cast<std::size_t>(p.b)]);
}

}  // namespace

std::vector<double> pair_distances_serial(std::span<const WorldCapsule> capsules,
                                          std::span<const CapsulePairIndex> pairs) {
  std::vector<double> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = pair_distance(capsules, pairs[i]);
  return out;
}

std::vector<double> pair_distances_parallel(std::span<const WorldCapsule> capsules,
                                            std::span<const CapsulePairIndex> pairs) {
  std::vector<double> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = pair_distance(capsules, pairs[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<double> pair_distances(std::span<const WorldCapsule> capsules,
                                   std::span<const CapsulePairIndex> pairs) {
  return pairs.size() >= kParallelThreshold ? pair_distances_parallel(capsules, pairs)
                                            : pair_distances_serial(capsules, pairs);
}

std::vector<Vec3> ee_trajectory_serial(const ArmModel& model, std::span<const JointVector> qs) {
  std::vector<Vec3> out(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) out[i] = end_effector_position(model, qs[i]);
  return out;
}

std::vector<Vec3> ee_trajectory_parallel(const ArmModel& model, std::span<const JointVector> qs) {
  std::vector<Vec3> out(qs.size());
  const auto n = static_cast<std::ptrdiff_t>(qs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = end_effector_position(model, qs[k]);
  }
  return out;
}

ClosestApproach closest_approach_serial(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || a.size() != b.size()) {
    throw std::invalid_argument("closest_approach: trajectories must be non-empty and equal length");
  }
  ClosestApproach best{0, (a[0] - b[0]).norm()};
  for (std::size_t i = 1; i < a.size(); ++i) {
    const double d = (a[i] - b[i]).norm();
    if (d < best.distance) best = {i, d};
  }
  return best;
}

ClosestApproach closest_approach_parallel(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || a.size() != b.size()) {
    throw std::invalid_argument("closest_approach: trajectories must be non-empty and equal length");
  }
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  ClosestApproach best{0, (a[0] - b[0]).norm()};
#pragma omp parallel
  {
    ClosestApproach local = best;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 1; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double d = (a[k] - b[k]).norm();
      if (d < local.distance) local = {k, d};
    }
#pragma omp critical
    {
      if (local.distance < best.distance ||
          (local.distance == best.distance && local.index < best.index)) {
        best = local;
      }
    }
  }
  return best;
}

std::size_t argmin(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmin of empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

}  // namespace tbag::kernels
