#include "growflow/core/types.hpp"

#include "growflow/core/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>

namespace growflow {

bool Box::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

bool Box::contains(const Box& other) const { return contains(other.min) && contains(other.max); }

void GaussianSet::add(const Vec3& center, const Vec4& rotation, const Vec3& log_scale, double opacity_logit,
                      const Vec3& color, bool foreground) {
  centers.insert(centers.end(), center.data(), center.data() + 3);
  rotations.insert(rotations.end(), rotation.data(), rotation.data() + 4);
  log_scales.insert(log_scales.end(), log_scale.data(), log_scale.data() + 3);
  opacity_logits.push_back(opacity_logit);
  colors.insert(colors.end(), color.data(), color.data() + 3);
  foreground_mask.push_back(foreground ? 1 : 0);
}

Vec4 GaussianSet::rotation(std::size_t i) const {
  return Vec4(rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]);
}

std::vector<std::size_t> GaussianSet::foreground_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < foreground_mask.size(); ++i) {
    if (foreground_mask[i]) out.push_back(i);
  }
  return out;
}

void GaussianSet::validate() const {
  const std::size_t n = size();
  if (centers.size() != 3 * n || rotations.size() != 4 * n || log_scales.size() != 3 * n ||
      colors.size() != 3 * n || foreground_mask.size() != n) {
    throw ContractError("GaussianSet: attribute arrays disagree in length (N = " + std::to_string(n) + ")");
  }
}

void Camera::validate() const {
  const Mat3 should_be_identity = rotation_world_to_cam * rotation_world_to_cam.transpose();
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(rotation_world_to_cam.determinant() - 1.0) > 1e-9) {
    throw ContractError("Camera: rotation is not a proper orthonormal matrix");
  }
  if (width < 1 || height < 1) throw ContractError("Camera: image dimensions must be >= 1");
  if (!(fx > 0.0) || !(fy > 0.0)) throw ContractError("Camera: focal lengths must be positive");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation_world_to_cam.row(0) = right.transpose();
  cam.rotation_world_to_cam.row(1) = down.transpose();
  cam.rotation_world_to_cam.row(2) = forward.transpose();
  cam.translation = -cam.rotation_world_to_cam * eye;
  cam.fx = focal;
  cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

Image::Image(int width, int height, double fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height * 3, fill) {
  if (width < 0 || height < 0) throw ContractError("Image: negative dimensions");
}

Image::Image(int width, int height, const Vec3& fill) : Image(width, height) {
  for (std::size_t p = 0; p < pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) pixels_[3 * p + c] = fill[c];
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

TimeAxis TimeAxis::from_raw(std::vector<int> raw, std::vector<std::size_t> supervised) {
  if (raw.size() < 2) throw ContractError("TimeAxis: need at least two timesteps");
  TimeAxis axis;
  axis.raw_timesteps = std::move(raw);
  const double first = axis.raw_timesteps.front();
  const double span = static_cast<double>(axis.raw_timesteps.back()) - first;
  if (!(span > 0)) throw ContractError("TimeAxis: raw timesteps must be increasing");
  for (int r : axis.raw_timesteps) axis.normalized.push_back((r - first) / span);
  axis.normalized.back() = 1.0;
  axis.final_index = axis.raw_timesteps.size() - 1;
  std::sort(supervised.begin(), supervised.end());
  supervised.erase(std::unique(supervised.begin(), supervised.end()), supervised.end());
  axis.supervised = std::move(supervised);
  axis.validate();
  return axis;
}

TimeAxis TimeAxis::from_raw(std::vector<int> raw, std::size_t stride) {
  if (stride == 0) throw ContractError("TimeAxis: stride must be >= 1");
  std::vector<std::size_t> sup;
  for (std::size_t i = 0; i < raw.size(); i += stride) sup.push_back(i);
  if (!raw.empty()) sup.push_back(raw.size() - 1);
  return from_raw(std::move(raw), std::move(sup));
}

bool TimeAxis::is_supervised(std::size_t index) const {
  return std::binary_search(supervised.begin(), supervised.end(), index);
}

std::vector<double> TimeAxis::supervised_times() const {
  std::vector<double> out;
  for (auto i : supervised) out.push_back(normalized[i]);
  return out;
}

void TimeAxis::validate() const {
  if (raw_timesteps.size() != normalized.size() || raw_timesteps.size() < 2) {
    throw ContractError("TimeAxis: need matching raw/normalized arrays of length >= 2");
  }
  for (std::size_t i = 1; i < normalized.size(); ++i) {
    if (!(normalized[i] > normalized[i - 1])) throw ContractError("TimeAxis: normalized times not increasing");
  }
  if (normalized.front() != 0.0 || normalized.back() != 1.0) {
    throw ContractError("TimeAxis: normalized times must span [0, 1]");
  }
  if (final_index != raw_timesteps.size() - 1) throw ContractError("TimeAxis: final index must be the last");
  if (supervised.empty() || supervised.back() != final_index) {
    throw ContractError("TimeAxis: the final timestep must be supervised");
  }
  if (supervised.back() >= raw_timesteps.size()) throw ContractError("TimeAxis: supervised index out of range");
}

}  // namespace growflow
