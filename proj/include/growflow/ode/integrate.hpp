#pragma once

#include "growflow/ode/geom_state.hpp"

#include <functional>
#include <span>
#include <vector>

namespace growflow::field {
class VelocityField;
}

namespace growflow::ode {

enum class Method { Rk4Fixed, Rk45Adaptive };

// dy/dt at (y, t), same length as y.
using Derivative = std::function<std::vector<double>(std::span<const double> y, double t)>;

struct IntegrationOptions {
  Method method = Method::Rk4Fixed;
  int substeps = 8;
  double rtol = 1e-4;
  double atol = 1e-5;
  int max_steps = 100000;
  bool renormalize_quats = true;
  // Quaternion block of the state (GeomState layout). Zero count means a
  // plain vector with no quaternions.
  std::size_t gaussian_count = 0;

  void validate() const;
  IntegrationOptions for_state(const GeomState& s) const;
};

struct IntegrationResult {
  std::vector<double> state;
  std::vector<double> sample_times;  // accepted step endpoints, starting at t0
  std::vector<std::vector<double>> samples;
  int steps = 0;
  int rejected = 0;
};

std::vector<double> rk4_step(const Derivative& f, std::span<const double> y, double t, double h,
                             const IntegrationOptions& options = {});

// Integrates from t0 to t1 (either order). Throws NumericalError on
// non-finite derivatives, step underflow or step-count overflow.
IntegrationResult integrate(const Derivative& f, std::span<const double> y0, double t0, double t1,
                            const IntegrationOptions& options = {});

// Max-norm deviation after integrating t0 -> t1 -> t0.
double roundtrip_defect(const Derivative& f, std::span<const double> y0, double t0, double t1,
                        const IntegrationOptions& options = {});

// Derivative of a GeomState-layout vector under a velocity field.
Derivative field_derivative(const field::VelocityField& field);

GeomState integrate_state(const field::VelocityField& field, const GeomState& s0, double t0, double t1,
                          const IntegrationOptions& options);

}  // namespace growflow::ode
