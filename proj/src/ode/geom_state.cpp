#include "growflow/ode/geom_state.hpp"

#include "growflow/core/errors.hpp"

#include <cmath>
#include <string>

namespace growflow::ode {

GeomState GeomState::gather(const GaussianSet& g, std::vector<std::size_t> indices, bool with_color) {
  GeomState s;
  s.indices = std::move(indices);
  s.with_color = with_color;
  const std::size_t n = s.count();
  s.values.assign(s.width() * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = s.indices[k];
    if (i >= g.size()) throw ContractError("GeomState::gather: index out of range");
    for (int d = 0; d < 3; ++d) s.values[3 * k + d] = g.centers[3 * i + d];
    for (int d = 0; d < 4; ++d) s.values[3 * n + 4 * k + d] = g.rotations[4 * i + d];
    for (int d = 0; d < 3; ++d) s.values[7 * n + 3 * k + d] = g.log_scales[3 * i + d];
    if (with_color) {
      for (int d = 0; d < 3; ++d) s.values[10 * n + 3 * k + d] = g.colors[3 * i + d];
    }
  }
  return s;
}

GeomState GeomState::foreground(const GaussianSet& g, bool with_color) {
  return gather(g, g.foreground_indices(), with_color);
}

void GeomState::scatter(GaussianSet& g) const {
  const std::size_t n = count();
  if (values.size() != width() * n) throw ContractError("GeomState::scatter: malformed state");
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = indices[k];
    if (i >= g.size()) throw ContractError("GeomState::scatter: index out of range");
    for (int d = 0; d < 3; ++d) g.centers[3 * i + d] = values[3 * k + d];
    for (int d = 0; d < 4; ++d) g.rotations[4 * i + d] = values[3 * n + 4 * k + d];
    for (int d = 0; d < 3; ++d) g.log_scales[3 * i + d] = values[7 * n + 3 * k + d];
    if (with_color) {
      for (int d = 0; d < 3; ++d) g.colors[3 * i + d] = values[10 * n + 3 * k + d];
    }
  }
}

void GeomState::renormalize_quaternions() {
  auto q = rotations();
  for (std::size_t k = 0; k < count(); ++k) {
    double* r = &q[4 * k];
    const double norm = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
    if (!(norm > 1e-12)) {
      throw NumericalError("degenerate quaternion for Gaussian " + std::to_string(indices[k]));
    }
    for (int d = 0; d < 4; ++d) r[d] /= norm;
  }
}

std::size_t owner_of(std::size_t element, std::size_t count) {
  if (count == 0) return element;
  if (element < 3 * count) return element / 3;
  if (element < 7 * count) return (element - 3 * count) / 4;
  return ((element - 7 * count) % (3 * count)) / 3;
}

}  // namespace growflow::ode
