#pragma once

#include "growflow/core/types.hpp"
#include "growflow/diff/tape.hpp"
#include "growflow/splat/render.hpp"

namespace growflow::splat {

// Tape handles for the five Gaussian attribute arrays (flat, GaussianSet
// layout). Any of them may be constants.
struct GaussianVars {
  diff::Var centers;
  diff::Var rotations;
  diff::Var log_scales;
  diff::Var opacity_logits;
  diff::Var colors;
};

// Records a render as one tape node whose value is the image (H*W*3) and
// whose adjoint is render_backward().
diff::Var render_op(diff::Tape& tape, const GaussianVars& vars, const Camera& camera,
                    const RenderSettings& settings);

// Loads the attribute arrays of a GaussianSet as tape constants.
GaussianVars constant_vars(diff::Tape& tape, const GaussianSet& gaussians);

}  // namespace growflow::splat
