#pragma once

#include "growflow/core/types.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace growflow::splat {

struct RenderSettings {
  double dilation = 0.3;   // pixels^2 added to every screen-space covariance
  double near_plane = 0.01;
  double cull_sigma = 3.0;  // minimum footprint half-extent in standard deviations
  double max_alpha = 0.99;
  double min_alpha = 1.0 / 255.0;
  double max_condition = 1e12;
  Vec3 background = Vec3::Ones();
};

struct RenderStats {
  std::size_t visible = 0;
  std::size_t culled = 0;
  std::size_t singular = 0;  // skipped for an ill-conditioned screen covariance
};

struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;
  Vec3 color = Vec3::Zero();
  double alpha_peak = 0.0;
  std::size_t source_index = 0;
  Mat2 conic = Mat2::Identity();  // inverse of cov2d
  // Half-extent (pixels) of the square footprint; outside it every
  // contribution is below min_alpha.
  double radius = 0.0;
};

// Linearized (EWA) projection of Gaussian `index`. Returns nullopt when the
// Gaussian is behind the near plane, its footprint misses the image, or its
// screen covariance is singular (the latter counted in stats->singular).
std::optional<ProjectedGaussian> project(const GaussianSet& gaussians, std::size_t index, const Camera& camera,
                                         const RenderSettings& settings, RenderStats* stats = nullptr);

// Front-to-back alpha compositing in (depth, source_index) order, evaluating
// each Gaussian only inside its footprint. Rotations are normalized on use.
Image render(const GaussianSet& gaussians, const Camera& camera, const RenderSettings& settings,
             RenderStats* stats = nullptr);

// Same contract as render() but every non-culled-by-depth Gaussian is
// evaluated at every pixel; the test oracle for render().
Image render_brute_force(const GaussianSet& gaussians, const Camera& camera, const RenderSettings& settings);

// Gradients w.r.t. each GaussianSet attribute, same flat layout.
struct GaussianGrads {
  GaussianGrads() = default;
  explicit GaussianGrads(std::size_t n)
      : centers(3 * n, 0.0), rotations(4 * n, 0.0), log_scales(3 * n, 0.0), opacity_logits(n, 0.0),
        colors(3 * n, 0.0) {}

  std::vector<double> centers;
  std::vector<double> rotations;
  std::vector<double> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> colors;
};

// Vector-Jacobian product of render(): given dL/dimage, returns dL/dparams.
// Depth ordering is treated as piecewise constant.
GaussianGrads render_backward(const GaussianSet& gaussians, const Camera& camera, const RenderSettings& settings,
                              const Image& d_image);

enum class LossKind { L1, L1Ssim };

struct LossOptions {
  LossKind kind = LossKind::L1;
  double ssim_lambda = 0.2;
  bool freeze_appearance = false;
};

// (1 - lambda) * L1 + lambda * (1 - SSIM) or plain mean absolute error.
// Writes dL/dpred into *d_pred when non-null.
double image_loss(const Image& pred, const Image& target, const LossOptions& options, Image* d_pred);

struct LossAndGrads {
  double loss = 0.0;
  GaussianGrads grads;
  Image rendered;
};

LossAndGrads render_with_grads(const GaussianSet& gaussians, const Camera& camera, const Image& target,
                               const LossOptions& options, const RenderSettings& settings);

}  // namespace growflow::splat
