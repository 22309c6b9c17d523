#include "detail.hpp"

#include "growflow/core/errors.hpp"

#include <algorithm>
#include <cstdint>

namespace growflow::splat {

namespace {

struct Contribution {
  std::uint32_t pixel;
  double transmittance;  // before this Gaussian
  double alpha;
  double falloff;
  bool clamped;
};

// dL/dR -> dL/dq for R built from a unit quaternion (w, x, y, z).
Vec4 rotation_grad_to_quat(const Mat3& gr, const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 d;
  d[0] = 2 * (-z * gr(0, 1) + y * gr(0, 2) + z * gr(1, 0) - x * gr(1, 2) - y * gr(2, 0) + x * gr(2, 1));
  d[1] = 2 * (y * gr(0, 1) + z * gr(0, 2) + y * gr(1, 0) - 2 * x * gr(1, 1) - w * gr(1, 2) + z * gr(2, 0) +
              w * gr(2, 1) - 2 * x * gr(2, 2));
  d[2] = 2 * (-2 * y * gr(0, 0) + x * gr(0, 1) + w * gr(0, 2) + x * gr(1, 0) + z * gr(1, 2) - w * gr(2, 0) +
              z * gr(2, 1) - 2 * y * gr(2, 2));
  d[3] = 2 * (-2 * z * gr(0, 0) - w * gr(0, 1) + x * gr(0, 2) + w * gr(1, 0) - 2 * z * gr(1, 1) + y * gr(1, 2) +
              x * gr(2, 0) + y * gr(2, 1));
  return d;
}

}  // namespace

GaussianGrads render_backward(const GaussianSet& g, const Camera& cam, const RenderSettings& settings,
                              const Image& d_image) {
  g.validate();
  cam.validate();
  if (d_image.width() != cam.width || d_image.height() != cam.height) {
    throw ContractError("render_backward: adjoint image does not match the camera");
  }
  const auto projections = detail::project_sorted(g, cam, settings, true, nullptr);
  const std::size_t n_pix = static_cast<std::size_t>(cam.width) * cam.height;

  // Forward replay, recording every composited contribution.
  std::vector<double> transmittance(n_pix, 1.0);
  std::vector<Contribution> contributions;
  std::vector<std::size_t> first(projections.size() + 1, 0);
  for (std::size_t j = 0; j < projections.size(); ++j) {
    const auto& p = projections[j];
    first[j] = contributions.size();
    for (int y = p.y0; y <= p.y1; ++y) {
      for (int x = p.x0; x <= p.x1; ++x) {
        const double f = detail::falloff(p, x + 0.5, y + 0.5);
        const double raw = p.pg.alpha_peak * f;
        const double alpha = std::min(settings.max_alpha, raw);
        if (alpha < settings.min_alpha) continue;
        const auto pix = static_cast<std::uint32_t>(y * cam.width + x);
        contributions.push_back({pix, transmittance[pix], alpha, f, raw > settings.max_alpha});
        transmittance[pix] *= 1.0 - alpha;
      }
    }
  }
  first[projections.size()] = contributions.size();

  // Color seen behind the current Gaussian, starting with the background.
  std::vector<double> behind(3 * n_pix);
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    for (int c = 0; c < 3; ++c) behind[3 * pix + c] = settings.background[c] * transmittance[pix];
  }

  GaussianGrads grads(g.size());
  const auto dimg = d_image.data();
  const Mat3& w = cam.rotation_world_to_cam;

  for (std::size_t jj = projections.size(); jj-- > 0;) {
    const auto& p = projections[jj];
    const Vec3& color = p.pg.color;
    const Mat2& conic = p.pg.conic;
    Vec2 d_mean = Vec2::Zero();
    double d_a = 0.0, d_b = 0.0, d_c = 0.0;
    double d_peak = 0.0;
    Vec3 d_color = Vec3::Zero();

    for (std::size_t k = first[jj]; k < first[jj + 1]; ++k) {
      const auto& ct = contributions[k];
      const std::size_t pix = ct.pixel;
      const Vec3 gpix(dimg[3 * pix], dimg[3 * pix + 1], dimg[3 * pix + 2]);
      const Vec3 back(behind[3 * pix], behind[3 * pix + 1], behind[3 * pix + 2]);
      const double wt = ct.alpha * ct.transmittance;

      d_color += wt * gpix;
      const double d_alpha = ct.transmittance * color.dot(gpix) - back.dot(gpix) / (1.0 - ct.alpha);
      for (int c = 0; c < 3; ++c) behind[3 * pix + c] += wt * color[c];
      if (ct.clamped) continue;

      d_peak += d_alpha * ct.falloff;
      const double d_power = d_alpha * p.pg.alpha_peak * ct.falloff;
      const double dx = (pix % cam.width) + 0.5 - p.pg.mean2d.x();
      const double dy = (pix / cam.width) + 0.5 - p.pg.mean2d.y();
      d_mean.x() += d_power * (conic(0, 0) * dx + conic(0, 1) * dy);
      d_mean.y() += d_power * (conic(0, 1) * dx + conic(1, 1) * dy);
      d_a += -0.5 * d_power * dx * dx;
      d_b += -d_power * dx * dy;
      d_c += -0.5 * d_power * dy * dy;
    }

    const std::size_t i = p.pg.source_index;
    for (int c = 0; c < 3; ++c) grads.colors[3 * i + c] += d_color[c];
    grads.opacity_logits[i] += d_peak * p.pg.alpha_peak * (1.0 - p.pg.alpha_peak);

    // conic = cov2d^-1 (full-matrix convention: the off-diagonal term appears twice).
    Mat2 g_conic;
    g_conic << d_a, 0.5 * d_b, 0.5 * d_b, d_c;
    const Mat2 g_cov = -conic * g_conic * conic;

    // cov2d = J M J^T + dilation I.
    const Mat3 g_cov_cam = p.jac.transpose() * g_cov * p.jac;
    const detail::Mat23 g_jac = 2.0 * g_cov * p.jac * p.cov_cam;

    // M = W Sigma W^T, Sigma = R D R^T.
    const Mat3 g_sigma = w.transpose() * g_cov_cam * w;
    const Mat3 g_rot = 2.0 * g_sigma * p.rot * p.variances.asDiagonal();
    const Mat3 rt_g_r = p.rot.transpose() * g_sigma * p.rot;
    for (int k = 0; k < 3; ++k) grads.log_scales[3 * i + k] += 2.0 * p.variances[k] * rt_g_r(k, k);

    const Vec4 g_qunit = rotation_grad_to_quat(g_rot, p.q_unit);
    const Vec4 g_q = (g_qunit - p.q_unit * p.q_unit.dot(g_qunit)) / p.q_norm;
    for (int k = 0; k < 4; ++k) grads.rotations[4 * i + k] += g_q[k];

    // Camera-space position through mean2d and the Jacobian.
    const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.p_cam.z();
    const double z2 = z * z, z3 = z2 * z;
    Vec3 g_pcam;
    g_pcam.x() = d_mean.x() * cam.fx / z + g_jac(0, 2) * (-cam.fx / z2);
    g_pcam.y() = d_mean.y() * cam.fy / z + g_jac(1, 2) * (-cam.fy / z2);
    g_pcam.z() = d_mean.x() * (-cam.fx * x / z2) + d_mean.y() * (-cam.fy * y / z2) + g_jac(0, 0) * (-cam.fx / z2) +
                 g_jac(0, 2) * (2.0 * cam.fx * x / z3) + g_jac(1, 1) * (-cam.fy / z2) +
                 g_jac(1, 2) * (2.0 * cam.fy * y / z3);
    const Vec3 g_center = w.transpose() * g_pcam;
    for (int k = 0; k < 3; ++k) grads.centers[3 * i + k] += g_center[k];
  }
  return grads;
}

}  // namespace growflow::splat
