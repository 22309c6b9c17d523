#pragma once

#include "growflow/core/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace growflow::ode {

// Geometric parameters of a subset of Gaussians as one flat vector, laid out
// in blocks [centers 3n | quaternions 4n | log-scales 3n | colors 3n (optional)].
// This is the same layout the velocity field emits, so a derivative is just
// the field output.
struct GeomState {
  std::vector<std::size_t> indices;  // into the source GaussianSet
  bool with_color = false;
  std::vector<double> values;

  std::size_t count() const { return indices.size(); }
  std::size_t width() const { return with_color ? 13 : 10; }

  std::span<double> centers() { return block(0, 3); }
  std::span<double> rotations() { return block(3, 4); }
  std::span<double> log_scales() { return block(7, 3); }
  std::span<double> colors() { return with_color ? block(10, 3) : std::span<double>{}; }
  std::span<const double> centers() const { return block(0, 3); }
  std::span<const double> rotations() const { return block(3, 4); }
  std::span<const double> log_scales() const { return block(7, 3); }
  std::span<const double> colors() const { return with_color ? block(10, 3) : std::span<const double>{}; }

  static GeomState gather(const GaussianSet& g, std::vector<std::size_t> indices, bool with_color);
  static GeomState foreground(const GaussianSet& g, bool with_color);

  // Writes the state back into the entries it was gathered from.
  void scatter(GaussianSet& g) const;
  void renormalize_quaternions();

  bool operator==(const GeomState&) const = default;

 private:
  std::span<double> block(std::size_t start, std::size_t width) {
    return std::span<double>(values).subspan(start * count(), width * count());
  }
  std::span<const double> block(std::size_t start, std::size_t width) const {
    return std::span<const double>(values).subspan(start * count(), width * count());
  }
};

// Gaussian that owns element j of a state vector with `count` Gaussians.
std::size_t owner_of(std::size_t element, std::size_t count);

}  // namespace growflow::ode
