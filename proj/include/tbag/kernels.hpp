#pragma once

// Batch kernels behind collision checking and trajectory analysis. Each
// kernel has a serial reference and an OpenMP version; they return
// bit-identical results (no reassociated reductions).

#include <cstddef>
#include <span>
#include <vector>

#include "tbag/kinematics.hpp"
#include "tbag/safety.hpp"

namespace tbag::kernels {

std::vector<double> pair_distances_serial(std::span<const WorldCapsule> capsules,
                                          std::span<const CapsulePairIndex> pairs);
std::vector<double> pair_distances_parallel(std::span<const WorldCapsule> capsules,
                                            std::span<const CapsulePairIndex> pairs);
/// Picks the parallel kernel only when the batch is large enough to pay for it.
std::vector<double> pair_distances(std::span<const WorldCapsule> capsules,
                                   std::span<const CapsulePairIndex> pairs);

std::vector<Vec3> ee_trajectory_serial(const ArmModel& model, std::span<const JointVector> qs);
std::vector<Vec3> ee_trajectory_parallel(const ArmModel& model, std::span<const JointVector> qs);

struct ClosestApproach {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Smallest |a_i - b_i| over i; ties resolve to the lowest index.
/// Precondition: a.size() == b.size() > 0.
ClosestApproach closest_approach_serial(std::span<const Vec3> a, std::span<const Vec3> b);
ClosestApproach closest_approach_parallel(std::span<const Vec3> a, std::span<const Vec3> b);

/// Index of the first minimum. Precondition: non-empty.
std::size_t argmin(std::span<const double> values);

inline constexpr std::size_t kParallelThreshold = 2048;

}  // namespace tbag::kernels
