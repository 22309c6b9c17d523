#include "growflow/splat/render_op.hpp"

#include "growflow/core/errors.hpp"

namespace growflow::splat {

namespace {

GaussianSet gather_set(const diff::Tape& tape, const GaussianVars& v) {
  GaussianSet g;
  auto copy = [&](diff::Var var, std::vector<double>& dst) {
    auto src = tape.value(var);
    dst.assign(src.begin(), src.end());
  };
  copy(v.centers, g.centers);
  copy(v.rotations, g.rotations);
  copy(v.log_scales, g.log_scales);
  copy(v.opacity_logits, g.opacity_logits);
  copy(v.colors, g.colors);
  g.foreground_mask.assign(g.opacity_logits.size(), 0);
  return g;
}

}  // namespace

GaussianVars constant_vars(diff::Tape& tape, const GaussianSet& g) {
  return {tape.constant(g.centers), tape.constant(g.rotations), tape.constant(g.log_scales),
          tape.constant(g.opacity_logits), tape.constant(g.colors)};
}

diff::Var render_op(diff::Tape& tape, const GaussianVars& vars, const Camera& camera,
                    const RenderSettings& settings) {
  GaussianSet g = gather_set(tape, vars);
  try {
    g.validate();
  } catch (const ContractError&) {
    throw ContractError("render_op: Gaussian attribute vars have inconsistent lengths");
  }
  Image image = render(g, camera, settings);
  std::vector<double> value(image.data().begin(), image.data().end());
  return tape.custom(
      "render", {vars.centers, vars.rotations, vars.log_scales, vars.opacity_logits, vars.colors}, std::move(value),
      [vars, camera, settings, g = std::move(g)](diff::Tape& t, std::span<const double> adjoint) {
        Image d_image(camera.width, camera.height);
        std::copy(adjoint.begin(), adjoint.end(), d_image.data().begin());
        const GaussianGrads grads = render_backward(g, camera, settings, d_image);
        auto accumulate = [&](diff::Var v, const std::vector<double>& src) {
          if (!t.requires_grad(v)) return;
          auto dst = t.adjoint(v);
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        };
        accumulate(vars.centers, grads.centers);
        accumulate(vars.rotations, grads.rotations);
        accumulate(vars.log_scales, grads.log_scales);
        accumulate(vars.opacity_logits, grads.opacity_logits);
        accumulate(vars.colors, grads.colors);
      });
}

}  // namespace growflow::splat
