#pragma once

#include "growflow/diff/tape.hpp"
#include "growflow/field/velocity_field.hpp"

#include <functional>

namespace growflow::ode {

using TapedDerivative = std::function<diff::Var(diff::Tape&, diff::Var y, double t)>;

TapedDerivative taped_field_derivative(const field::VelocityField& field, const field::BoundParams& bound,
                                       std::size_t count);

// Fixed-step RK4 recorded on the tape. When gaussian_count > 0 the quaternion
// block is renormalized after every step.
diff::Var taped_rk4(diff::Tape& tape, const TapedDerivative& f, diff::Var y0, double t0, double t1, int substeps,
                    std::size_t gaussian_count);

}  // namespace growflow::ode
