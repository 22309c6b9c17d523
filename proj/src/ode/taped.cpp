#include "growflow/ode/taped.hpp"

#include "growflow/core/errors.hpp"

#include <array>
#include <utility>

namespace growflow::ode {

TapedDerivative taped_field_derivative(const field::VelocityField& field, const field::BoundParams& bound,
                                       std::size_t count) {
  return [&field, &bound, count](diff::Tape& tape, diff::Var y, double t) {
    if (tape.size(y) != static_cast<std::size_t>(field.velocity_width()) * count) {
      throw ContractError("taped_field_derivative: state width does not match the field");
    }
    return field.forward(tape, bound, tape.slice(y, 0, 3 * count), count, t);
  };
}

diff::Var taped_rk4(diff::Tape& tape, const TapedDerivative& f, diff::Var y0, double t0, double t1, int substeps,
                    std::size_t gaussian_count) {
  if (substeps < 1) throw ContractError("taped_rk4: substeps must be >= 1");
  if (t0 == t1) return y0;
  const double h = (t1 - t0) / substeps;
  diff::Var y = y0;
  for (int s = 0; s < substeps; ++s) {
    const double t = t0 + s * h;
    const auto k1 = f(tape, y, t);
    const std::array<std::pair<double, diff::Var>, 2> a2{{{1.0, y}, {0.5 * h, k1}}};
    const auto k2 = f(tape, tape.lincomb(a2), t + 0.5 * h);
    const std::array<std::pair<double, diff::Var>, 2> a3{{{1.0, y}, {0.5 * h, k2}}};
    const auto k3 = f(tape, tape.lincomb(a3), t + 0.5 * h);
    const std::array<std::pair<double, diff::Var>, 2> a4{{{1.0, y}, {h, k3}}};
    const auto k4 = f(tape, tape.lincomb(a4), t + h);
    const std::array<std::pair<double, diff::Var>, 5> step{
        {{1.0, y}, {h / 6, k1}, {h / 3, k2}, {h / 3, k3}, {h / 6, k4}}};
    y = tape.lincomb(step);
    if (gaussian_count > 0) y = tape.normalize_rows(y, 3 * gaussian_count, gaussian_count, 4);
  }
  return y;
}

}  // namespace growflow::ode
