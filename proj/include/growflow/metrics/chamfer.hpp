#pragma once

#include "growflow/core/types.hpp"

#include <vector>

namespace growflow::metrics {

// Predicted foreground centers over an evaluation time grid:
// positions[k][i] is Gaussian i at times[k].
struct GrowthTrajectory {
  std::vector<double> times;
  std::vector<std::vector<Vec3>> positions;
};

// Index of the nearest point; ties go to the lowest index.
std::size_t nearest_point(const Vec3& p, const std::vector<Vec3>& points);

// Mean distance at each timestep between every Gaussian and the ground-truth
// point it was matched to at the first timestep.
std::vector<double> chamfer_per_timestep(const GrowthTrajectory& predicted, const std::vector<std::vector<Vec3>>& gt);

// Average of chamfer_per_timestep over all timesteps but the last (all of
// them when there is only one).
double chamfer_tracking(const GrowthTrajectory& predicted, const std::vector<std::vector<Vec3>>& gt);

}  // namespace growflow::metrics
