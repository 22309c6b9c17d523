#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace growflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;  // quaternions are stored (w, x, y, z)
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  bool contains(const Vec3& p) const;
  bool contains(const Box& other) const;
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool operator==(const Box&) const = default;
};

// A set of N Gaussian primitives stored as flat structure-of-arrays buffers so
// the differentiable pipeline can view each attribute as one contiguous span.
class GaussianSet {
 public:
  std::vector<double> centers;         // 3N
  std::vector<double> rotations;       // 4N, (w, x, y, z)
  std::vector<double> log_scales;      // 3N
  std::vector<double> opacity_logits;  // N
  std::vector<double> colors;          // 3N, linear RGB in [0, 1]
  std::vector<std::uint8_t> foreground_mask;  // N, 1 = foreground

  std::size_t size() const { return opacity_logits.size(); }
  bool empty() const { return size() == 0; }

  void add(const Vec3& center, const Vec4& rotation, const Vec3& log_scale,
           double opacity_logit, const Vec3& color, bool foreground = false);

  Eigen::Map<const Vec3> center(std::size_t i) const { return Eigen::Map<const Vec3>(&centers[3 * i]); }
  Eigen::Map<Vec3> center(std::size_t i) { return Eigen::Map<Vec3>(&centers[3 * i]); }
  Vec4 rotation(std::size_t i) const;
  Eigen::Map<const Vec3> log_scale(std::size_t i) const { return Eigen::Map<const Vec3>(&log_scales[3 * i]); }
  Eigen::Map<const Vec3> color(std::size_t i) const { return Eigen::Map<const Vec3>(&colors[3 * i]); }

  std::vector<std::size_t> foreground_indices() const;

  // Throws ContractError when array lengths disagree.
  void validate() const;

  bool operator==(const GaussianSet&) const = default;
};

struct Camera {
  Mat3 rotation_world_to_cam = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Vec3 to_camera(const Vec3& world) const { return rotation_world_to_cam * world + translation; }
  Vec3 position() const { return -rotation_world_to_cam.transpose() * translation; }

  // Throws ContractError unless the rotation is proper orthonormal and the
  // image is at least 1x1.
  void validate() const;

  // OpenCV convention: +z forward, +x right, +y down in the image.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                        int height);
};

// Row-major H x W x 3 image, linear RGB.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, const Vec3& fill);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int row, int col, int ch) { return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + ch]; }
  double at(int row, int col, int ch) const {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + ch];
  }

  std::span<double> data() { return pixels_; }
  std::span<const double> data() const { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

// Binary foreground mask, row-major H x W.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  std::size_t count() const;
};

struct TimeAxis {
  std::vector<int> raw_timesteps;     // every timestep present in the dataset, ascending
  std::vector<double> normalized;     // affine map of raw_timesteps onto [0, 1]
  std::vector<std::size_t> supervised;  // indices into raw_timesteps used for training, ascending
  std::size_t final_index = 0;        // index of the fully grown timestep

  static TimeAxis from_raw(std::vector<int> raw, std::vector<std::size_t> supervised);
  static TimeAxis from_raw(std::vector<int> raw, std::size_t stride);

  std::size_t size() const { return raw_timesteps.size(); }
  bool is_supervised(std::size_t index) const;
  // Supervised normalized times, ascending.
  std::vector<double> supervised_times() const;

  void validate() const;
};

}  // namespace growflow
