#include "detail.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/metrics/image_metrics.hpp"

#include <algorithm>
#include <cmath>

namespace growflow::splat {

namespace {

void check_inputs(const GaussianSet& g, const Camera& cam, const RenderSettings& settings) {
  g.validate();
  cam.validate();
  if (settings.dilation < 0.0) throw ContractError("render: dilation must be >= 0");
}

}  // namespace

Image render(const GaussianSet& g, const Camera& cam, const RenderSettings& settings, RenderStats* stats) {
  check_inputs(g, cam, settings);
  const auto projections = detail::project_sorted(g, cam, settings, true, stats);
  Image image(cam.width, cam.height, 0.0);
  std::vector<double> transmittance(image.pixel_count(), 1.0);
  auto px = image.data();

  for (const auto& p : projections) {
    const Vec3& color = p.pg.color;
    for (int y = p.y0; y <= p.y1; ++y) {
      for (int x = p.x0; x <= p.x1; ++x) {
        const double alpha = std::min(settings.max_alpha, p.pg.alpha_peak * detail::falloff(p, x + 0.5, y + 0.5));
        if (alpha < settings.min_alpha) continue;
        const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
        const double w = transmittance[pix] * alpha;
        px[3 * pix] += w * color[0];
        px[3 * pix + 1] += w * color[1];
        px[3 * pix + 2] += w * color[2];
        transmittance[pix] *= 1.0 - alpha;
      }
    }
  }
  for (std::size_t pix = 0; pix < transmittance.size(); ++pix) {
    for (int c = 0; c < 3; ++c) px[3 * pix + c] += settings.background[c] * transmittance[pix];
  }
  return image;
}

Image render_brute_force(const GaussianSet& g, const Camera& cam, const RenderSettings& settings) {
  check_inputs(g, cam, settings);
  const auto projections = detail::project_sorted(g, cam, settings, false, nullptr);
  Image image(cam.width, cam.height, 0.0);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 accum = Vec3::Zero();
      double transmittance = 1.0;
      for (const auto& p : projections) {
        const double alpha = std::min(settings.max_alpha, p.pg.alpha_peak * detail::falloff(p, x + 0.5, y + 0.5));
        if (alpha < settings.min_alpha) continue;
        accum += transmittance * alpha * p.pg.color;
        transmittance *= 1.0 - alpha;
      }
      accum += settings.background * transmittance;
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = accum[c];
    }
  }
  return image;
}

double image_loss(const Image& pred, const Image& target, const LossOptions& options, Image* d_pred) {
  if (pred.width() != target.width() || pred.height() != target.height()) {
    throw ContractError("image_loss: target dimensions do not match the rendered image");
  }
  const auto p = pred.data();
  const auto t = target.data();
  const double n = static_cast<double>(p.size());
  const double l1_weight = options.kind == LossKind::L1 ? 1.0 : 1.0 - options.ssim_lambda;

  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - t[i]);
  l1 /= n;

  if (d_pred) {
    *d_pred = Image(pred.width(), pred.height(), 0.0);
    auto d = d_pred->data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = p[i] - t[i];
      d[i] = l1_weight * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
    }
  }
  if (options.kind == LossKind::L1) return l1;

  Image d_ssim;
  const double s = metrics::ssim_with_grad(pred, target, d_pred ? &d_ssim : nullptr);
  if (d_pred) {
    auto d = d_pred->data();
    auto ds = d_ssim.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= options.ssim_lambda * ds[i];
  }
  return l1_weight * l1 + options.ssim_lambda * (1.0 - s);
}

LossAndGrads render_with_grads(const GaussianSet& g, const Camera& cam, const Image& target,
                               const LossOptions& options, const RenderSettings& settings) {
  if (target.width() != cam.width || target.height() != cam.height) {
    throw ContractError("render_with_grads: target dimensions do not match the camera");
  }
  LossAndGrads out;
  out.rendered = render(g, cam, settings);
  Image d_image;
  out.loss = image_loss(out.rendered, target, options, &d_image);
  out.grads = render_backward(g, cam, settings, d_image);
  if (options.freeze_appearance) {
    std::fill(out.grads.colors.begin(), out.grads.colors.end(), 0.0);
    std::fill(out.grads.opacity_logits.begin(), out.grads.opacity_logits.end(), 0.0);
  }
  return out;
}

}  // namespace growflow::splat
