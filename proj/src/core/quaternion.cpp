#include "growflow/core/quaternion.hpp"

#include "growflow/core/errors.hpp"

namespace growflow {

Vec4 normalize_quaternion(const Vec4& q) {
  const double norm = q.norm();
  if (!(norm > 1e-12)) throw NumericalError("normalize_quaternion: degenerate rotation (|q| <= 1e-12)");
  Vec4 out = q / norm;
  for (int i = 0; i < 4; ++i) {
    if (out[i] != 0.0) {
      if (out[i] < 0.0) out = -out;
      break;
    }
  }
  return out;
}

Mat3 unit_quaternion_to_rotation_unchecked(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 quaternion_to_rotation(const Vec4& q) {
  if (std::abs(q.norm() - 1.0) > 1e-9) throw ContractError("quaternion_to_rotation: quaternion is not unit norm");
  return unit_quaternion_to_rotation_unchecked(q);
}

Mat3 covariance_from(const Vec4& q, const Vec3& log_scale) {
  const Mat3 r = quaternion_to_rotation(q);
  const Vec3 var = (2.0 * log_scale).array().exp();
  return r * var.asDiagonal() * r.transpose();
}

}  // namespace growflow
