#include "growflow/ode/integrate.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/field/velocity_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace growflow::ode {

namespace {

void check_derivative(std::span<const double> dy, std::size_t expected, const IntegrationOptions& o, double t) {
  if (dy.size() != expected) throw ContractError("integrate: derivative length does not match state");
  for (std::size_t j = 0; j < dy.size(); ++j) {
    if (!std::isfinite(dy[j])) {
      throw NumericalError("integration failure: non-finite derivative for Gaussian " +
                           std::to_string(owner_of(j, o.gaussian_count)) + " at t=" + std::to_string(t));
    }
  }
}

std::vector<double> eval(const Derivative& f, std::span<const double> y, double t, const IntegrationOptions& o) {
  auto dy = f(y, t);
  check_derivative(dy, y.size(), o, t);
  return dy;
}

void renormalize(std::vector<double>& y, const IntegrationOptions& o) {
  const std::size_t n = o.gaussian_count;
  if (!o.renormalize_quats || n == 0) return;
  for (std::size_t k = 0; k < n; ++k) {
    double* q = &y[3 * n + 4 * k];
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(norm > 1e-12)) throw NumericalError("integration failure: degenerate quaternion for Gaussian " + std::to_string(k));
    for (int d = 0; d < 4; ++d) q[d] /= norm;
  }
}

// y + h * sum(c_i k_i)
std::vector<double> axpy(std::span<const double> y, double h, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
  std::vector<double> out(y.begin(), y.end());
  for (const auto& [c, k] : terms) {
    if (c == 0.0) continue;
    const double s = h * c;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += s * (*k)[j];
  }
  return out;
}

// Fehlberg 4(5) tableau.
constexpr double kA2 = 1.0 / 4, kA3 = 3.0 / 8, kA4 = 12.0 / 13, kA6 = 1.0 / 2;
constexpr double kB21 = 1.0 / 4;
constexpr double kB31 = 3.0 / 32, kB32 = 9.0 / 32;
constexpr double kB41 = 1932.0 / 2197, kB42 = -7200.0 / 2197, kB43 = 7296.0 / 2197;
constexpr double kB51 = 439.0 / 216, kB52 = -8.0, kB53 = 3680.0 / 513, kB54 = -845.0 / 4104;
constexpr double kB61 = -8.0 / 27, kB62 = 2.0, kB63 = -3544.0 / 2565, kB64 = 1859.0 / 4104, kB65 = -11.0 / 40;
// 5th-order weights (propagated) and 4th-order weights (embedded).
constexpr double kC1 = 16.0 / 135, kC3 = 6656.0 / 12825, kC4 = 28561.0 / 56430, kC5 = -9.0 / 50, kC6 = 2.0 / 55;
constexpr double kD1 = 25.0 / 216, kD3 = 1408.0 / 2565, kD4 = 2197.0 / 4104, kD5 = -1.0 / 5;

IntegrationResult integrate_fixed(const Derivative& f, std::span<const double> y0, double t0, double t1,
                                  const IntegrationOptions& o) {
  IntegrationResult r;
  r.state.assign(y0.begin(), y0.end());
  r.sample_times.push_back(t0);
  r.samples.push_back(r.state);
  const double h = (t1 - t0) / o.substeps;
  for (int s = 0; s < o.substeps; ++s) {
    const double t = t0 + s * h;
    r.state = rk4_step(f, r.state, t, h, o);
    ++r.steps;
    r.sample_times.push_back(s + 1 == o.substeps ? t1 : t + h);
    r.samples.push_back(r.state);
  }
  return r;
}

IntegrationResult integrate_adaptive(const Derivative& f, std::span<const double> y0, double t0, double t1,
                                     const IntegrationOptions& o) {
  IntegrationResult r;
  r.state.assign(y0.begin(), y0.end());
  r.sample_times.push_back(t0);
  r.samples.push_back(r.state);
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  double h = std::min(span, 0.05);
  double err_prev = 1.0;
  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 5.0;
  constexpr double kAlpha = 0.7 / 5.0, kBeta = 0.4 / 5.0;

  auto k1 = eval(f, r.state, t, o);
  while (dir * (t1 - t) > 0.0) {
    if (r.steps + r.rejected >= o.max_steps) {
      throw NumericalError("integration failure: exceeded max_steps (" + std::to_string(o.max_steps) + ")");
    }
    const double remaining = std::abs(t1 - t);
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    if (!last && h < 1e-12) throw NumericalError("integration failure: step size underflow at t=" + std::to_string(t));
    const double hs = dir * h;
    const auto& y = r.state;
    auto k2 = eval(f, axpy(y, hs, {{kB21, &k1}}), t + kA2 * hs, o);
    auto k3 = eval(f, axpy(y, hs, {{kB31, &k1}, {kB32, &k2}}), t + kA3 * hs, o);
    auto k4 = eval(f, axpy(y, hs, {{kB41, &k1}, {kB42, &k2}, {kB43, &k3}}), t + kA4 * hs, o);
    auto k5 = eval(f, axpy(y, hs, {{kB51, &k1}, {kB52, &k2}, {kB53, &k3}, {kB54, &k4}}), t + hs, o);
    auto k6 = eval(f, axpy(y, hs, {{kB61, &k1}, {kB62, &k2}, {kB63, &k3}, {kB64, &k4}, {kB65, &k5}}), t + kA6 * hs, o);
    auto y5 = axpy(y, hs, {{kC1, &k1}, {kC3, &k3}, {kC4, &k4}, {kC5, &k5}, {kC6, &k6}});

    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double y4j = y[j] + hs * (kD1 * k1[j] + kD3 * k3[j] + kD4 * k4[j] + kD5 * k5[j]);
      const double sc = o.atol + o.rtol * std::max(std::abs(y[j]), std::abs(y5[j]));
      const double e = (y5[j] - y4j) / sc;
      acc += e * e;
    }
    const double err = y.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(y.size()));

    if (err <= 1.0) {
      t = last ? t1 : t + hs;
      r.state = std::move(y5);
      renormalize(r.state, o);
      ++r.steps;
      r.sample_times.push_back(t);
      r.samples.push_back(r.state);
      double factor = err == 0.0 ? kMaxFactor : kSafety * std::pow(err, -kAlpha) * std::pow(err_prev, kBeta);
      h *= std::clamp(factor, kMinFactor, kMaxFactor);
      err_prev = std::max(err, 1e-4);
      if (dir * (t1 - t) > 0.0) k1 = eval(f, r.state, t, o);
    } else {
      ++r.rejected;
      h *= std::clamp(kSafety * std::pow(err, -kAlpha), kMinFactor, 1.0);
    }
  }
  return r;
}

}  // namespace

void IntegrationOptions::validate() const {
  if (substeps < 1) throw ConfigError("integration: substeps must be >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("integration: rtol and atol must be > 0");
  if (max_steps < 1) throw ConfigError("integration: max_steps must be >= 1");
}

IntegrationOptions IntegrationOptions::for_state(const GeomState& s) const {
  IntegrationOptions o = *this;
  o.gaussian_count = s.count();
  return o;
}

std::vector<double> rk4_step(const Derivative& f, std::span<const double> y, double t, double h,
                             const IntegrationOptions& options) {
  if (h == 0.0) throw ContractError("rk4_step: h must be nonzero");
  const auto k1 = eval(f, y, t, options);
  const auto k2 = eval(f, axpy(y, h, {{0.5, &k1}}), t + 0.5 * h, options);
  const auto k3 = eval(f, axpy(y, h, {{0.5, &k2}}), t + 0.5 * h, options);
  const auto k4 = eval(f, axpy(y, h, {{1.0, &k3}}), t + h, options);
  auto out = axpy(y, h, {{1.0 / 6, &k1}, {1.0 / 3, &k2}, {1.0 / 3, &k3}, {1.0 / 6, &k4}});
  renormalize(out, options);
  return out;
}

IntegrationResult integrate(const Derivative& f, std::span<const double> y0, double t0, double t1,
                            const IntegrationOptions& options) {
  options.validate();
  if (t0 == t1) {
    IntegrationResult r;
    r.state.assign(y0.begin(), y0.end());
    r.sample_times.push_back(t0);
    r.samples.push_back(r.state);
    return r;
  }
  return options.method == Method::Rk4Fixed ? integrate_fixed(f, y0, t0, t1, options)
                                            : integrate_adaptive(f, y0, t0, t1, options);
}

double roundtrip_defect(const Derivative& f, std::span<const double> y0, double t0, double t1,
                        const IntegrationOptions& options) {
  const auto forward = integrate(f, y0, t0, t1, options);
  const auto back = integrate(f, forward.state, t1, t0, options);
  double worst = 0.0;
  for (std::size_t j = 0; j < y0.size(); ++j) worst = std::max(worst, std::abs(back.state[j] - y0[j]));
  return worst;
}

Derivative field_derivative(const field::VelocityField& field) {
  const std::size_t width = static_cast<std::size_t>(field.velocity_width());
  return [&field, width](std::span<const double> y, double t) {
    if (y.size() % width != 0) throw ContractError("field_derivative: state width does not match the field");
    const std::size_t n = y.size() / width;
    return field.eval_flat(y.subspan(0, 3 * n), t);
  };
}

GeomState integrate_state(const field::VelocityField& field, const GeomState& s0, double t0, double t1,
                          const IntegrationOptions& options) {
  if (static_cast<std::size_t>(field.velocity_width()) != s0.width()) {
    throw ContractError("integrate_state: color flow setting of field and state disagree");
  }
  GeomState out = s0;
  out.values = integrate(field_derivative(field), s0.values, t0, t1, options.for_state(s0)).state;
  return out;
}

}  // namespace growflow::ode
