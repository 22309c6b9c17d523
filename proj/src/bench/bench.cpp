#include "growflow/bench/bench.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"
#include "growflow/field/velocity_field.hpp"
#include "growflow/ode/integrate.hpp"
#include "growflow/splat/render.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <numbers>
#include <random>

namespace growflow::bench {

namespace {

double median_ns(const std::function<void()>& fn, int reps) {
  fn();
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

GaussianSet random_scene(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianSet g;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec4 q = normalize_quaternion(Vec4(1.0 + u(rng), u(rng), u(rng), u(rng)));
    g.add(Vec3(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng)), q, Vec3::Constant(std::log(0.05 + 0.03 * u(rng))),
          logit(0.5 + 0.3 * u(rng)), Vec3(0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng)), true);
  }
  return g;
}

bool selected(const BenchOptions& o, const std::string& kernel, const std::string& scale) {
  return o.filter.empty() || (kernel + "/" + scale).find(o.filter) != std::string::npos;
}

}  // namespace

std::vector<BenchResult> run_benches(const BenchOptions& options) {
  if (options.reps < 10) throw ConfigError("bench: reps must be >= 10");
  std::vector<BenchResult> out;

  const GaussianSet scene = random_scene(200, 1);
  for (int size : {64, 128, 256}) {
    const std::string scale = std::to_string(size) + "x" + std::to_string(size);
    if (!selected(options, "render", scale)) continue;
    const Camera cam = Camera::look_at(Vec3(0, -3, 0), Vec3::Zero(), Vec3(0, 0, 1), 0.9 * size, size, size);
    splat::RenderSettings settings;
    const double ns = median_ns([&] { (void)splat::render(scene, cam, settings); }, options.reps);
    out.push_back({"render", scale, ns, static_cast<double>(size) * size / (ns * 1e-9), "pixels/s", options.reps});
  }

  field::FieldConfig fc;
  fc.bounds = Box{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  const field::VelocityField field(fc);
  for (int n : {256, 1024, 4096}) {
    const std::string scale = std::to_string(n) + "q";
    if (!selected(options, "hex_interp", scale)) continue;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    const double ns = median_ns(
        [&] {
          for (const auto& p : pts) (void)field::hex_interp(field.params(), fc, p, 0.5);
        },
        options.reps);
    out.push_back({"hex_interp", scale, ns, n / (ns * 1e-9), "queries/s", options.reps});
  }

  for (int n : {16, 64, 256}) {
    const std::string scale = std::to_string(n) + "g";
    if (!selected(options, "rk4_step", scale)) continue;
    const GaussianSet g = random_scene(static_cast<std::size_t>(n), 3);
    const auto s = ode::GeomState::foreground(g, false);
    ode::IntegrationOptions io;
    io.gaussian_count = s.count();
    const auto f = ode::field_derivative(field);
    const double ns = median_ns([&] { (void)ode::rk4_step(f, s.values, 0.5, -0.05, io); }, options.reps);
    out.push_back({"rk4_step", scale, ns, n / (ns * 1e-9), "states/s", options.reps});
  }
  return out;
}

void write_tsv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "kernel\tscale\tns_per_call\tthroughput\tunit\treps\n";
  for (const auto& r : results) {
    out << r.kernel << '\t' << r.scale << '\t' << r.ns_per_call << '\t' << r.throughput << '\t' << r.unit << '\t'
        << r.reps << '\n';
  }
}

}  // namespace growflow::bench
