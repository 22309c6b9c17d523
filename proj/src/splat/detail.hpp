#pragma once

#include "growflow/splat/render.hpp"

#include <Eigen/Core>

#include <vector>

namespace growflow::splat::detail {

using Mat23 = Eigen::Matrix<double, 2, 3>;

// A projected Gaussian plus the intermediates its adjoint needs.
struct Projection {
  ProjectedGaussian pg;
  Vec4 q_unit = Vec4::Zero();
  double q_norm = 1.0;
  Mat3 rot = Mat3::Identity();
  Vec3 variances = Vec3::Ones();  // exp(2 log_s)
  Vec3 p_cam = Vec3::Zero();
  Mat23 jac = Mat23::Zero();
  Mat3 cov_cam = Mat3::Identity();  // W Sigma W^T
  // Inclusive pixel index range of the footprint, clipped to the image.
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

enum class Status { Visible, Culled, Singular };

Status project_one(const GaussianSet& gaussians, std::size_t index, const Camera& camera,
                   const RenderSettings& settings, bool footprint_cull, Projection& out);

// Visible projections sorted by (depth, source_index).
std::vector<Projection> project_sorted(const GaussianSet& gaussians, const Camera& camera,
                                       const RenderSettings& settings, bool footprint_cull, RenderStats* stats);

// Gaussian falloff at pixel center (px, py).
inline double falloff(const Projection& p, double px, double py) {
  const double dx = px - p.pg.mean2d.x();
  const double dy = py - p.pg.mean2d.y();
  const double power =
      -0.5 * (p.pg.conic(0, 0) * dx * dx + 2.0 * p.pg.conic(0, 1) * dx * dy + p.pg.conic(1, 1) * dy * dy);
  return std::exp(power);
}

}  // namespace growflow::splat::detail
