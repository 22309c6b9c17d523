#include "growflow/core/errors.hpp"
#include "growflow/field/velocity_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace growflow::field {

std::vector<double> fourier_encode(const Vec4& coords, int bands) {
  if (bands < 1) throw ContractError("fourier_encode: bands must be >= 1");
  const std::size_t b = static_cast<std::size_t>(bands);
  std::vector<double> out(8 * b + 4);
  for (std::size_t d = 0; d < 4; ++d) {
    for (std::size_t k = 0; k < b; ++k) {
      const double w = std::ldexp(std::numbers::pi, static_cast<int>(k));
      out[d * b + k] = std::sin(w * coords[d]);
      out[4 * b + d * b + k] = std::cos(w * coords[d]);
    }
    out[8 * b + d] = coords[d];
  }
  return out;
}

diff::Var fourier_encode_op(diff::Tape& tape, const FieldConfig& config, diff::Var centers, std::size_t count,
                            double t) {
  if (tape.size(centers) != 3 * count) throw ContractError("fourier_encode_op: centers must be count x 3");
  const int bands = config.fourier_bands;
  const std::size_t b = static_cast<std::size_t>(bands);
  const std::size_t width = 8 * b + 4;
  const auto pos = tape.value(centers);

  // Normalized coordinates, clamped like the grid encoder; clamped axes carry no gradient.
  std::vector<double> u(4 * count);
  std::vector<double> inv_extent(4 * count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double extent = config.bounds.max[d] - config.bounds.min[d];
      const double raw = (pos[3 * i + d] - config.bounds.min[d]) / extent;
      u[4 * i + d] = std::clamp(raw, 0.0, 1.0);
      if (raw >= 0.0 && raw <= 1.0) inv_extent[4 * i + d] = 1.0 / extent;
    }
    u[4 * i + 3] = std::clamp(t, 0.0, 1.0);
  }

  std::vector<double> out(count * width);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec4 c(u[4 * i], u[4 * i + 1], u[4 * i + 2], u[4 * i + 3]);
    const auto row = fourier_encode(c, bands);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }

  return tape.custom("fourier_encode", {centers}, std::move(out),
                     [centers, count, b, width, u = std::move(u), inv_extent = std::move(inv_extent)](
                         diff::Tape& tp, std::span<const double> g) {
                       if (!tp.requires_grad(centers)) return;
                       auto adj = tp.adjoint(centers);
                       for (std::size_t i = 0; i < count; ++i) {
                         const double* gi = &g[i * width];
                         for (std::size_t d = 0; d < 3; ++d) {
                           if (inv_extent[4 * i + d] == 0.0) continue;
                           const double x = u[4 * i + d];
                           double du = gi[8 * b + d];
                           for (std::size_t k = 0; k < b; ++k) {
                             const double w = std::ldexp(std::numbers::pi, static_cast<int>(k));
                             du += gi[d * b + k] * w * std::cos(w * x);
                             du -= gi[4 * b + d * b + k] * w * std::sin(w * x);
                           }
                           adj[3 * i + d] += du * inv_extent[4 * i + d];
                         }
                       }
                     });
}

}  // namespace growflow::field
