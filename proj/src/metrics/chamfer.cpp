#include "growflow/metrics/chamfer.hpp"

#include "growflow/core/errors.hpp"

#include <limits>

namespace growflow::metrics {

std::size_t nearest_point(const Vec3& p, const std::vector<Vec3>& points) {
  if (points.empty()) throw ContractError("nearest_point: empty point set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double d = (points[j] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<double> chamfer_per_timestep(const GrowthTrajectory& predicted, const std::vector<std::vector<Vec3>>& gt) {
  if (gt.empty() || gt.front().empty()) throw ContractError("chamfer_tracking: empty ground truth");
  if (predicted.positions.size() != gt.size()) {
    throw ContractError("chamfer_tracking: predicted and ground truth time grids differ");
  }
  const auto& first = predicted.positions.front();
  if (first.empty()) throw ContractError("chamfer_tracking: no foreground Gaussians");
  std::vector<std::size_t> match(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) match[i] = nearest_point(first[i], gt.front());

  std::vector<double> out;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const auto& pos = predicted.positions[k];
    if (pos.size() != first.size()) throw ContractError("chamfer_tracking: Gaussian count changes over time");
    if (gt[k].size() != gt.front().size()) throw ContractError("chamfer_tracking: ground-truth point count changes");
    double sum = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) sum += (pos[i] - gt[k][match[i]]).norm();
    out.push_back(sum / static_cast<double>(pos.size()));
  }
  return out;
}

double chamfer_tracking(const GrowthTrajectory& predicted, const std::vector<std::vector<Vec3>>& gt) {
  const auto per = chamfer_per_timestep(predicted, gt);
  const std::size_t used = per.size() > 1 ? per.size() - 1 : per.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < used; ++k) sum += per[k];
  return sum / static_cast<double>(used);
}

}  // namespace growflow::metrics
