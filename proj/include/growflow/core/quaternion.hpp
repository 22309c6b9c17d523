#pragma once

#include "growflow/core/types.hpp"

#include <cmath>

namespace growflow {

// Returns q / |q| with the first nonzero component made non-negative.
// Throws NumericalError when |q| <= 1e-12.
Vec4 normalize_quaternion(const Vec4& q);

// Requires |q| = 1 within 1e-9 (ContractError otherwise).
Mat3 quaternion_to_rotation(const Vec4& q);

// Same formula without the unit-norm precondition; used internally after an
// explicit normalization.
Mat3 unit_quaternion_to_rotation_unchecked(const Vec4& q);

// R diag(exp(log_s))^2 R^T.
Mat3 covariance_from(const Vec4& q, const Vec3& log_scale);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace growflow
