#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"
#include "growflow/field/velocity_field.hpp"
#include "growflow/ode/geom_state.hpp"
#include "growflow/ode/integrate.hpp"
#include "growflow/ode/taped.hpp"
#include "oracles.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace growflow;
using namespace growflow::ode;

namespace {

Derivative exponential() {
  return [](std::span<const double> y, double) { return std::vector<double>(y.begin(), y.end()); };
}

Derivative zero_field() {
  return [](std::span<const double> y, double) { return std::vector<double>(y.size(), 0.0); };
}

GaussianSet random_set(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  GaussianSet g;
  for (int i = 0; i < n; ++i) {
    g.add(Vec3(u(rng), u(rng), u(rng)), normalize_quaternion(Vec4(1 + u(rng), u(rng), u(rng), u(rng))),
          Vec3(u(rng), u(rng), u(rng)) - Vec3::Constant(2), u(rng), Vec3(0.5, 0.5, 0.5) + Vec3(u(rng), u(rng), u(rng)) * 0.5,
          i % 2 == 0);
  }
  return g;
}

}  // namespace

TEST_CASE("integration options defaults and validation") {
  IntegrationOptions o;
  CHECK(o.substeps == 8);
  CHECK(o.rtol == 1e-4);
  CHECK(o.atol == 1e-5);
  CHECK_NOTHROW(o.validate());
  o.substeps = 0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = {};
  o.rtol = 0.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("geom state round trip is lossless") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianSet g = random_set(rng, 1 + trial);
    for (bool color : {false, true}) {
      auto s = GeomState::foreground(g, color);
      CHECK(s.count() == g.foreground_indices().size());
      CHECK(s.values.size() == s.count() * (color ? 13 : 10));
      GaussianSet copy = g;
      for (double& c : copy.centers) c = 0.0;
      for (std::size_t i : s.indices) {
        for (int d = 0; d < 3; ++d) copy.centers[3 * i + d] = -7.0;
      }
      s.scatter(copy);
      for (std::size_t i : s.indices) CHECK(copy.center(i) == g.center(i));
      CHECK(GeomState::foreground(copy, color) == s);
    }
  }
}

TEST_CASE("owner_of maps every block element to its Gaussian") {
  const std::size_t n = 5;
  for (std::size_t j = 0; j < 13 * n; ++j) {
    std::size_t expect;
    if (j < 3 * n) expect = j / 3;
    else if (j < 7 * n) expect = (j - 3 * n) / 4;
    else if (j < 10 * n) expect = (j - 7 * n) / 3;
    else expect = (j - 10 * n) / 3;
    CHECK(owner_of(j, n) == expect);
  }
}

TEST_CASE("rk4 step examples") {
  const std::vector<double> y = {1.0};
  auto next = rk4_step(exponential(), y, 0.0, 0.1);
  CHECK(std::abs(next[0] - 1.10517083) < 5e-9);
  CHECK(std::abs(next[0] - std::exp(0.1)) == doctest::Approx(8.47e-8).epsilon(0.01));

  const std::vector<double> z = {0.3, -0.2, 1.5};
  CHECK(rk4_step(zero_field(), z, 0.2, 0.05) == z);
}

TEST_CASE("rk4 global error is fourth order") {
  for (double r : oracle::rk4_ratios_exponential()) {
    CHECK(r >= 12.0);
    CHECK(r <= 20.0);
  }
  for (double r : oracle::rk4_ratios_rotation()) {
    CHECK(r >= 12.0);
    CHECK(r <= 20.0);
  }
}

TEST_CASE("integrate: constant field is exact, equal times are a no-op") {
  const std::vector<double> v = {0.5, -1.0, 2.0};
  Derivative f = [v](std::span<const double>, double) { return v; };
  const std::vector<double> y0 = {1.0, 2.0, 3.0};
  for (auto method : {Method::Rk4Fixed, Method::Rk45Adaptive}) {
    IntegrationOptions o;
    o.method = method;
    auto r = integrate(f, y0, 0.25, 0.75, o);
    for (int j = 0; j < 3; ++j) CHECK(r.state[j] == doctest::Approx(y0[j] + 0.5 * v[j]).epsilon(1e-14));
    auto back = integrate(f, y0, 0.75, 0.25, o);
    for (int j = 0; j < 3; ++j) CHECK(back.state[j] == doctest::Approx(y0[j] - 0.5 * v[j]).epsilon(1e-14));
    auto same = integrate(f, y0, 0.4, 0.4, o);
    CHECK(same.state == y0);
    CHECK(same.steps == 0);
    // spans below the underflow threshold
    auto tiny = integrate(f, y0, 2.0 / 7.0, 0.285714285714, o);
    for (int j = 0; j < 3; ++j) CHECK(tiny.state[j] == doctest::Approx(y0[j]).epsilon(1e-12));
  }
}

TEST_CASE("integrate: rotational flow preserves radius at default tolerances") {
  const Vec3 w = Vec3(0.0, 0.6, 0.8);
  const Vec3 p(0.9, -0.4, 0.3);
  IntegrationOptions o;
  o.method = Method::Rk45Adaptive;
  auto r = integrate(oracle::rotational_field(w), std::vector<double>{p[0], p[1], p[2]}, 0.2, 0.7, o);
  const Vec3 got(r.state[0], r.state[1], r.state[2]);
  const Vec3 want = oracle::rotate_about(p, w, 0.5);
  CHECK(std::abs(got.norm() - p.norm()) <= 1e-6);
  // angle between the exact and integrated points
  CHECK(std::atan2(got.cross(want).norm(), got.dot(want)) < 1e-6);
  CHECK(r.sample_times.front() == 0.2);
  CHECK(r.sample_times.back() == 0.7);
  CHECK(r.samples.size() == r.sample_times.size());
}

TEST_CASE("adaptive agrees with 64-substep RK4") {
  CHECK(oracle::adaptive_vs_reference() <= 1e-3);
}

TEST_CASE("adaptive agrees with 64-substep RK4 within 10 rtol on random fields") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    field::VelocityField f(oracle::tiny_field_config());
    oracle::randomize_field(f, 100 + trial);
    GaussianSet g = random_set(rng, 4);
    auto s0 = GeomState::foreground(g, false);
    IntegrationOptions fixed;
    fixed.substeps = 64;
    IntegrationOptions adaptive;
    adaptive.method = Method::Rk45Adaptive;
    auto a = integrate_state(f, s0, 1.0, 0.0, adaptive);
    auto r = integrate_state(f, s0, 1.0, 0.0, fixed);
    double worst = 0.0;
    for (std::size_t j = 0; j < a.values.size(); ++j) worst = std::max(worst, std::abs(a.values[j] - r.values[j]));
    CHECK(worst <= 10 * adaptive.rtol);
  }
}

TEST_CASE("roundtrip defect") {
  const std::vector<double> y0 = {0.4, 0.2, -0.3};
  CHECK(roundtrip_defect(zero_field(), y0, 0.0, 1.0) == 0.0);

  // The h^5 local error terms of the forward and backward passes cancel for an
  // even-order method, so the defect shrinks one order faster than the
  // global error: about 32x per halving.
  Derivative f = [](std::span<const double> y, double t) {
    return std::vector<double>{std::sin(2 * y[1]) + t, y[0] * y[2], -std::cos(y[0]) * y[1]};
  };
  std::vector<double> defects;
  for (int n : {4, 8, 16, 32}) {
    IntegrationOptions o;
    o.substeps = n;
    defects.push_back(roundtrip_defect(f, y0, 0.0, 1.0, o));
  }
  for (std::size_t i = 0; i + 1 < defects.size(); ++i) {
    const double ratio = defects[i] / defects[i + 1];
    CHECK(ratio >= 24.0);
    CHECK(ratio <= 40.0);
  }
}

TEST_CASE("quaternions stay unit norm after every step") {
  field::VelocityField f(oracle::tiny_field_config());
  oracle::randomize_field(f, 42);
  std::mt19937_64 rng(4);
  GaussianSet g = random_set(rng, 6);
  auto s0 = GeomState::foreground(g, false);
  for (auto method : {Method::Rk4Fixed, Method::Rk45Adaptive}) {
    IntegrationOptions o = IntegrationOptions{}.for_state(s0);
    o.method = method;
    auto r = integrate(field_derivative(f), s0.values, 1.0, 0.0, o);
    for (const auto& sample : r.samples) {
      const std::size_t n = s0.count();
      for (std::size_t k = 0; k < n; ++k) {
        double nn = 0.0;
        for (int d = 0; d < 4; ++d) nn += sample[3 * n + 4 * k + d] * sample[3 * n + 4 * k + d];
        CHECK(std::abs(std::sqrt(nn) - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("fixed-step integration is bit-reproducible") {
  field::VelocityField f(oracle::tiny_field_config());
  oracle::randomize_field(f, 7);
  std::mt19937_64 rng(5);
  GaussianSet g = random_set(rng, 5);
  auto s0 = GeomState::foreground(g, false);
  IntegrationOptions o;
  auto a = integrate_state(f, s0, 1.0, 0.3, o);
  auto b = integrate_state(f, s0, 1.0, 0.3, o);
  CHECK(a == b);
}

TEST_CASE("failures: non-finite derivative names the Gaussian, step limits") {
  const std::size_t n = 3;
  std::vector<double> y(10 * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) y[3 * n + 4 * k] = 1.0;
  Derivative bad = [n](std::span<const double> s, double) {
    std::vector<double> d(s.size(), 0.0);
    d[7 * n + 3 * 2 + 1] = std::nan("");
    return d;
  };
  IntegrationOptions o;
  o.gaussian_count = n;
  try {
    integrate(bad, y, 1.0, 0.0, o);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("Gaussian 2") != std::string::npos);
  }

  Derivative stiff = [](std::span<const double> s, double) { return std::vector<double>{-1e9 * s[0]}; };
  IntegrationOptions a;
  a.method = Method::Rk45Adaptive;
  a.max_steps = 50;
  CHECK_THROWS_AS(integrate(stiff, std::vector<double>{1.0}, 0.0, 1.0, a), NumericalError);

  Derivative blowup = [](std::span<const double> s, double t) {
    return std::vector<double>{1.0 / std::pow(std::abs(t - 0.5) + 1e-300, 3.0) + 0 * s[0]};
  };
  a.max_steps = 100000;
  CHECK_THROWS_AS(integrate(blowup, std::vector<double>{1.0}, 0.0, 1.0, a), NumericalError);
}

TEST_CASE("taped rk4 matches the untaped integrator") {
  field::VelocityField f(oracle::tiny_field_config());
  oracle::randomize_field(f, 11);
  std::mt19937_64 rng(6);
  GaussianSet g = random_set(rng, 4);
  auto s0 = GeomState::foreground(g, false);
  IntegrationOptions o;
  o.substeps = 5;
  auto ref = integrate_state(f, s0, 0.9, 0.1, o);

  diff::Tape tape;
  auto bound = f.bind(tape);
  auto y = taped_rk4(tape, taped_field_derivative(f, bound, s0.count()), tape.view(s0.values), 0.9, 0.1, 5, s0.count());
  auto got = tape.value(y);
  for (std::size_t j = 0; j < got.size(); ++j) CHECK(got[j] == doctest::Approx(ref.values[j]).epsilon(1e-13));
}

TEST_CASE("gradients through taped rk4 wrt state and field parameters") {
  field::VelocityField f(oracle::tiny_field_config());
  oracle::randomize_field(f, 19);
  std::mt19937_64 rng(7);
  GaussianSet g = random_set(rng, 2);
  auto s0 = GeomState::foreground(g, false);
  const std::size_t n = s0.count();
  std::vector<double> weights(s0.values.size());
  oracle::fill_uniform(weights, rng, -1.0, 1.0);

  diff::ParameterStore state;
  state.add("y0", {s0.values.size()});
  std::copy(s0.values.begin(), s0.values.end(), state.values("y0").begin());

  auto loss_of = [&](diff::Tape& tape) {
    auto bound = f.bind(tape);
    auto y = taped_rk4(tape, taped_field_derivative(f, bound, n), tape.param(state, "y0"), 1.0, 0.5, 4, n);
    return tape.sum(tape.mul(y, tape.view(weights)));
  };
  auto wrt_state = [&](diff::ParameterStore&) {
    diff::Tape tape;
    auto loss = loss_of(tape);
    tape.backward(loss);
    f.params().zero_grad();
    return tape.scalar(loss);
  };
  CHECK(diff::finite_difference_check(wrt_state, state, {}).max_rel_error <= 1e-4);

  auto wrt_field = [&](diff::ParameterStore&) {
    diff::Tape tape;
    auto loss = loss_of(tape);
    tape.backward(loss);
    state.zero_grad();
    return tape.scalar(loss);
  };
  CHECK(diff::finite_difference_check(wrt_field, f.params(), {}).max_rel_error <= 1e-4);
}
