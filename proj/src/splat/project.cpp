#include "detail.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"

#include <algorithm>
#include <cmath>

namespace growflow::splat {
namespace detail {

Status project_one(const GaussianSet& g, std::size_t i, const Camera& cam, const RenderSettings& settings,
                   bool footprint_cull, Projection& out) {
  out.p_cam = cam.to_camera(g.center(i));
  const double z = out.p_cam.z();
  if (!(z > settings.near_plane)) return Status::Culled;

  const Vec4 q = g.rotation(i);
  out.q_norm = q.norm();
  if (!(out.q_norm > 1e-12)) throw NumericalError("render: degenerate rotation for Gaussian " + std::to_string(i));
  out.q_unit = q / out.q_norm;
  out.rot = unit_quaternion_to_rotation_unchecked(out.q_unit);
  out.variances = (2.0 * g.log_scale(i)).array().exp();

  const Mat3& w = cam.rotation_world_to_cam;
  const Mat3 sigma = out.rot * out.variances.asDiagonal() * out.rot.transpose();
  out.cov_cam = w * sigma * w.transpose();

  const double x = out.p_cam.x(), y = out.p_cam.y();
  out.jac << cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z);

  auto& pg = out.pg;
  pg.cov2d = out.jac * out.cov_cam * out.jac.transpose();
  pg.cov2d(0, 0) += settings.dilation;
  pg.cov2d(1, 1) += settings.dilation;
  // Symmetrize against roundoff so the conic is exactly symmetric.
  pg.cov2d(0, 1) = pg.cov2d(1, 0) = 0.5 * (pg.cov2d(0, 1) + pg.cov2d(1, 0));

  const double a = pg.cov2d(0, 0), b = pg.cov2d(0, 1), c = pg.cov2d(1, 1);
  const double mid = 0.5 * (a + c);
  const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  const double lambda_max = mid + rad;
  const double lambda_min = mid - rad;
  const double det = a * c - b * b;
  if (!(lambda_min > 0.0) || !(det > 0.0) || lambda_max / lambda_min > settings.max_condition) {
    return Status::Singular;
  }
  pg.conic << c / det, -b / det, -b / det, a / det;

  pg.mean2d = Vec2(cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy);
  pg.depth = z;
  pg.color = g.color(i);
  pg.alpha_peak = sigmoid(g.opacity_logits[i]);
  pg.source_index = i;

  double k = settings.cull_sigma;
  if (pg.alpha_peak > settings.min_alpha) {
    k = std::max(k, std::sqrt(2.0 * std::log(pg.alpha_peak / settings.min_alpha)));
  }
  pg.radius = k * std::sqrt(lambda_max);

  out.x0 = std::max(0, static_cast<int>(std::ceil(pg.mean2d.x() - pg.radius - 0.5)));
  out.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(pg.mean2d.x() + pg.radius - 0.5)));
  out.y0 = std::max(0, static_cast<int>(std::ceil(pg.mean2d.y() - pg.radius - 0.5)));
  out.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(pg.mean2d.y() + pg.radius - 0.5)));
  if (footprint_cull && (out.x1 < out.x0 || out.y1 < out.y0)) return Status::Culled;
  if (!footprint_cull) {
    out.x0 = 0;
    out.x1 = cam.width - 1;
    out.y0 = 0;
    out.y1 = cam.height - 1;
  }
  return Status::Visible;
}

std::vector<Projection> project_sorted(const GaussianSet& g, const Camera& cam, const RenderSettings& settings,
                                       bool footprint_cull, RenderStats* stats) {
  std::vector<Projection> out;
  out.reserve(g.size());
  Projection p;
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (project_one(g, i, cam, settings, footprint_cull, p)) {
      case Status::Visible:
        out.push_back(p);
        if (stats) ++stats->visible;
        break;
      case Status::Culled:
        if (stats) ++stats->culled;
        break;
      case Status::Singular:
        if (stats) ++stats->singular;
        break;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Projection& l, const Projection& r) {
    if (l.pg.depth != r.pg.depth) return l.pg.depth < r.pg.depth;
    return l.pg.source_index < r.pg.source_index;
  });
  return out;
}

}  // namespace detail

std::optional<ProjectedGaussian> project(const GaussianSet& gaussians, std::size_t index, const Camera& camera,
                                         const RenderSettings& settings, RenderStats* stats) {
  if (settings.dilation < 0.0) throw ContractError("project: dilation must be >= 0");
  if (index >= gaussians.size()) throw ContractError("project: index out of range");
  detail::Projection p;
  switch (detail::project_one(gaussians, index, camera, settings, true, p)) {
    case detail::Status::Visible:
      if (stats) ++stats->visible;
      return p.pg;
    case detail::Status::Culled:
      if (stats) ++stats->culled;
      return std::nullopt;
    case detail::Status::Singular:
      if (stats) ++stats->singular;
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace growflow::splat
