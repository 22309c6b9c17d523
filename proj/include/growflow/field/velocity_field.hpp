#pragma once

#include "growflow/core/checkpoint.hpp"
#include "growflow/core/types.hpp"
#include "growflow/diff/parameter_store.hpp"
#include "growflow/diff/tape.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace growflow::field {

enum class EncoderKind { HexPlane, FourierMlp };

struct FieldConfig {
  int spatial_resolution = 64;
  int temporal_resolution = 25;
  int upsample_factor = 2;
  int levels = 2;
  int features = 8;  // per level
  int hidden = 64;
  int fourier_bands = 6;
  EncoderKind encoder = EncoderKind::HexPlane;
  bool color_flow = false;
  Box bounds;  // positions are normalized to [0,1]^3 by this box
  std::uint64_t seed = 0;

  void validate() const;
  int feature_dim() const { return levels * features; }
  int spatial_res(int level) const;
  int temporal_res(int level) const;
};

// Plane p of a level spans axes kPlaneAxes[p] (0 = x, 1 = y, 2 = z, 3 = t).
inline constexpr std::array<std::array<int, 2>, 6> kPlaneAxes = {{{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 3}, {2, 3}}};
inline constexpr std::array<const char*, 6> kPlaneNames = {"xy", "yz", "xz", "xt", "yt", "zt"};

std::string plane_segment(int level, int plane);

struct Velocity {
  Vec3 d_center = Vec3::Zero();
  Vec4 d_quat = Vec4::Zero();
  Vec3 d_log_scale = Vec3::Zero();
  std::optional<Vec3> d_color;
};

struct InterpStats {
  std::size_t clamped = 0;  // queries outside bounds (or t outside [0,1]) that were clamped
};

enum class ParamGroup { Grid, Mlp };

// Parameter Vars of a field bound onto one tape.
using BoundParams = std::map<std::string, diff::Var, std::less<>>;

// F_phi: encoder (multi-level six-plane grid, or Fourier features + MLP)
// -> fusion MLP -> independent velocity heads for center, quaternion,
// log-scale and optionally color.
class VelocityField {
 public:
  explicit VelocityField(FieldConfig config);

  const FieldConfig& config() const { return config_; }
  diff::ParameterStore& params() { return params_; }
  const diff::ParameterStore& params() const { return params_; }

  // Per-Gaussian velocity width: 10, or 13 with color flow.
  int velocity_width() const { return config_.color_flow ? 13 : 10; }
  ParamGroup group(const diff::Segment& segment) const;

  // Fresh parameters from config().seed: planes at 1.0, final head layers zero.
  void reinitialize();

  BoundParams bind(diff::Tape& tape);

  // Encoder output for `count` centers (count x feature_dim).
  diff::Var encode(diff::Tape& tape, const BoundParams& bound, diff::Var centers, std::size_t count, double t) const;

  // Velocities for `count` centers at time t, laid out as consecutive blocks
  // [d_center (3n) | d_quat (4n) | d_log_scale (3n) | d_color (3n, optional)].
  diff::Var forward(diff::Tape& tape, const BoundParams& bound, diff::Var centers, std::size_t count,
                    double t) const;

  std::vector<double> eval_flat(std::span<const double> centers, double t) const;
  std::vector<Velocity> eval(std::span<const double> centers, double t) const;

  void save(CheckpointSections& sections, const std::string& prefix = "field.") const;
  static VelocityField load(const CheckpointSections& sections, const std::string& prefix = "field.");

 private:
  void add_mlp(const std::string& name, int in, int hidden, int out);

  FieldConfig config_;
  diff::ParameterStore params_;
};

// Multi-level six-plane interpolation at one point: bilinear per plane,
// product across planes, concatenation across levels.
std::vector<double> hex_interp(const diff::ParameterStore& params, const FieldConfig& config, const Vec3& position,
                               double t, InterpStats* stats = nullptr);

// Taped batch version; `planes` holds the 6 * levels plane Vars in
// (level, plane) order.
diff::Var hex_interp_op(diff::Tape& tape, std::span<const diff::Var> planes, const FieldConfig& config,
                        diff::Var centers, std::size_t count, double t);

// [sin(2^k pi u_d) | cos(2^k pi u_d) | u_d] for d over (x, y, z, t) and
// k < bands, where u are the normalized coordinates. Length 8 * bands + 4.
std::vector<double> fourier_encode(const Vec4& coords, int bands);

diff::Var fourier_encode_op(diff::Tape& tape, const FieldConfig& config, diff::Var centers, std::size_t count,
                            double t);

}  // namespace growflow::field
