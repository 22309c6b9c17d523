#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"
#include "growflow/splat/render.hpp"
#include "growflow/train/adam.hpp"
#include "growflow/train/model.hpp"
#include "growflow/train/stages.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace growflow;
using namespace growflow::train;
namespace fs = std::filesystem;

namespace {

// Every timestep shows the same scene, so the zero flow is optimal.
TimedDataset static_dataset(const GaussianSet& scene, int timesteps, int cameras, int size) {
  TimedDataset ds;
  std::vector<int> raw;
  for (int t = 0; t < timesteps; ++t) raw.push_back(t);
  ds.time_axis = TimeAxis::from_raw(raw, 1);
  ds.scene_bounds = Box{Vec3(-1.2, -1.2, -0.2), Vec3(1.2, 1.2, 1.1)};
  ds.foreground_box = Box{Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 1.0)};
  ds.dilation = 0.0;
  ds.background = Vec3::Zero();
  for (int c = 0; c < cameras; ++c) {
    const double a = 2.0 * 3.14159265358979 * c / cameras;
    ds.cameras.push_back(Camera::look_at(Vec3(2 * std::cos(a), 2 * std::sin(a), 0.8), Vec3(0, 0, 0.45),
                                         Vec3::UnitZ(), 1.2 * size, size, size));
  }
  const auto settings = render_settings(ds);
  for (int t = 0; t < timesteps; ++t) {
    for (int c = 0; c < cameras; ++c) ds.images[{static_cast<std::size_t>(t), static_cast<std::size_t>(c)}] = splat::render(scene, ds.cameras[c], settings);
  }
  return ds;
}

GaussianSet small_scene() {
  GaussianSet g;
  g.add(Vec3(0.0, 0.0, 0.3), Vec4(1, 0, 0, 0), Vec3::Constant(std::log(0.12)), 2.0, Vec3(0.2, 0.8, 0.3), true);
  g.add(Vec3(0.1, -0.1, 0.6), normalize_quaternion(Vec4(0.9, 0.2, 0.1, 0)), Vec3(-2.0, -2.3, -1.9), 1.5,
        Vec3(0.9, 0.4, 0.5), true);
  g.add(Vec3(0.0, 0.0, -0.1), Vec4(1, 0, 0, 0), Vec3(-0.5, -0.5, -3.0), 3.0, Vec3(0.5, 0.4, 0.3), false);
  return g;
}

TrainConfig flow_config() {
  TrainConfig c = oracle::small_train_config();
  c.view_batch = 2;
  return c;
}

double appearance_diff(const GaussianSet& a, const GaussianSet& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.opacity_logits.size(); ++i) d += std::abs(a.opacity_logits[i] - b.opacity_logits[i]);
  for (std::size_t i = 0; i < a.colors.size(); ++i) d += std::abs(a.colors[i] - b.colors[i]);
  return d;
}

}  // namespace

TEST_CASE("adam examples") {
  diff::ParameterStore s;
  s.add("x", {1}, 2.0);
  Adam adam(s.size());
  auto rate = [](const diff::Segment&) { return 0.01; };

  adam.step(s, rate);
  CHECK(s.values("x")[0] == 2.0);

  s.grads("x")[0] = 0.5;
  Adam fresh(s.size());
  fresh.step(s, rate);
  CHECK(s.values("x")[0] == doctest::Approx(2.0 - 0.01).epsilon(1e-12));
  CHECK(fresh.steps() == 1);

  double prev = s.values("x")[0];
  double delta = 0.0;
  for (int i = 0; i < 5000; ++i) {
    s.grads("x")[0] = 0.5;
    fresh.step(s, rate);
    delta = prev - s.values("x")[0];
    prev = s.values("x")[0];
  }
  CHECK(delta == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam uses per-segment rates") {
  diff::ParameterStore s;
  s.add("a", {2});
  s.add("b", {2});
  for (double& g : s.grads()) g = -1.0;
  Adam adam(s.size());
  adam.step(s, [](const diff::Segment& seg) { return seg.name == "a" ? 0.1 : 0.001; });
  CHECK(s.values("a")[1] == doctest::Approx(0.1));
  CHECK(s.values("b")[0] == doctest::Approx(0.001));
}

TEST_CASE("decayed rate schedule") {
  CHECK(decayed_rate(1.6e-3, 0.1, 0, 100) == doctest::Approx(1.6e-3));
  CHECK(decayed_rate(1.6e-3, 0.1, 99, 100) == doctest::Approx(1.6e-4));
  CHECK(decayed_rate(1.0, 0.1, 50, 101) == doctest::Approx(std::sqrt(0.1)));
  CHECK(decayed_rate(2.0, 0.1, 0, 1) == 2.0);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_global = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr_mlp = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.view_batch = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("initialization from seeds and uniform") {
  const auto ds = static_dataset(small_scene(), 2, 2, 16);
  TrainConfig c;
  c.init_count = 40;
  auto uniform = initialize_gaussians(ds, c, {});
  CHECK(uniform.size() == 40);
  for (std::size_t i = 0; i < uniform.size(); ++i) {
    CHECK(ds.foreground_box.contains(Vec3(uniform.center(i))));
    CHECK(uniform.foreground_mask[i] == 1);
    CHECK(sigmoid(uniform.opacity_logits[i]) == doctest::Approx(0.1));
    CHECK(uniform.color(i) == Vec3::Constant(0.5));
  }

  SeedPoints seeds{{Vec3(0, 0, 0.5), Vec3(0.1, 0, 0.5), Vec3(0, 0.2, 0.5), Vec3(0, 0, -0.1)}};
  c.init_jitter = 0.0;
  auto seeded = initialize_gaussians(ds, c, seeds);
  CHECK(seeded.size() == 4);
  CHECK(seeded.center(1) == Vec3(0.1, 0, 0.5));
  CHECK(seeded.foreground_mask == std::vector<std::uint8_t>{1, 1, 1, 0});
  // mean of the three nearest distances
  const double d01 = 0.1, d02 = 0.2, d03 = 0.6;
  CHECK(std::exp(seeded.log_scales[0]) == doctest::Approx((d01 + d02 + d03) / 3));

  CHECK(initialize_gaussians(ds, c, {}) == initialize_gaussians(ds, c, {}));
}

TEST_CASE("static stage fits a single opaque white Gaussian") {
  GaussianSet target;
  target.add(Vec3(0, 0, 0.45), Vec4(1, 0, 0, 0), Vec3::Constant(std::log(0.15)), 6.0, Vec3::Ones(), true);
  const auto ds = static_dataset(target, 2, 4, 16);

  GaussianSet init = target;
  init.centers[0] += 0.01;
  init.log_scales[1] += 0.05;
  init.colors = {0.9, 0.95, 0.9};
  TrainConfig c;
  c.n_static = 2000;
  c.view_batch = 2;
  std::ostringstream log;
  TrainIO io{&log, {}};
  auto out = static_stage(ds, c, init, io);
  CHECK(out.size() == 1);

  double loss = 0.0;
  splat::LossOptions lo;
  lo.kind = splat::LossKind::L1Ssim;
  for (std::size_t cam = 0; cam < ds.cameras.size(); ++cam) {
    loss += splat::render_with_grads(out, ds.cameras[cam], ds.image(ds.time_axis.final_index, cam), lo, render_settings(ds)).loss / 4;
  }
  CHECK(loss < 1e-4);

  // log: one tab-separated line per iteration
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 4);
    CHECK(line.rfind("static\t", 0) == 0);
  }
  CHECK(lines == 2000);
}

TEST_CASE("static stage: count preserved without densify, deterministic, rejects missing views") {
  synth::GeneratedScene scene;
  const auto spec = oracle::small_spec();
  const auto ds = oracle::small_dataset(spec, &scene);
  TrainConfig c = oracle::small_train_config();
  auto init = initialize_gaussians(ds, c, {});
  CHECK(init.size() == static_cast<std::size_t>(c.init_count));
  std::ostringstream l1, l2;
  auto a = static_stage(ds, c, init, {&l1, {}});
  auto b = static_stage(ds, c, init, {&l2, {}});
  CHECK(a.size() == init.size());
  CHECK(a == b);

  auto strip = [](const std::string& s) {
    // drop the wall-clock column
    std::istringstream in(s);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind('\t')) + "\n";
    return out;
  };
  CHECK(strip(l1.str()) == strip(l2.str()));

  auto broken = ds;
  broken.images.erase({ds.time_axis.final_index, ds.training_cameras().front()});
  CHECK_THROWS_AS(static_stage(broken, c, init), ConfigError);
}

TEST_CASE("densify changes topology and keeps masks consistent") {
  const auto spec = oracle::small_spec();
  const auto ds = oracle::small_dataset(spec);
  TrainConfig c = oracle::small_train_config();
  c.n_static = 30;
  c.densify.enabled = true;
  c.densify.interval = 10;
  c.densify.grad_threshold = 0.0;
  auto init = initialize_gaussians(ds, c, {});
  auto out = static_stage(ds, c, init);
  CHECK(out.size() > init.size());
  CHECK_NOTHROW(out.validate());
}

TEST_CASE("boundary stage on a static scene keeps the zero flow") {
  const GaussianSet scene = small_scene();
  const auto ds = static_dataset(scene, 3, 3, 12);
  TrainConfig c = flow_config();
  c.n_boundary = 15;
  field::VelocityField f(field_config_for(ds, c));
  auto cache = boundary_stage(scene, ds, f, c);
  CHECK(cache.snapshots.size() == 3);
  CHECK(cache.intervals() == 2);
  CHECK(cache.times == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(!cache.skip_boundary);
  const auto g0 = ode::GeomState::foreground(scene, false);
  for (const auto& s : cache.snapshots) {
    for (std::size_t j = 0; j < s.values.size(); ++j) CHECK(std::abs(s.values[j] - g0.values[j]) <= 1e-3);
  }
}

TEST_CASE("global stage on a static scene reaches low loss and leaves the cache alone") {
  const GaussianSet scene = small_scene();
  const auto ds = static_dataset(scene, 3, 3, 12);
  TrainConfig c = flow_config();
  c.n_boundary = 3;
  c.n_global = 10;
  field::VelocityField f(field_config_for(ds, c));
  auto cache = boundary_stage(scene, ds, f, c);
  const auto before = cache;
  StageHistory h;
  global_stage(scene, cache, ds, f, c, {}, &h);
  CHECK(cache == before);
  REQUIRE(h.losses.size() == 10);
  CHECK(h.losses.back() < 1e-3);
}

TEST_CASE("skip-boundary cache integrates from the final state") {
  const auto spec = oracle::small_spec();
  const auto ds = oracle::small_dataset(spec);
  GaussianSet scene = small_scene();
  auto cache = degenerate_cache(scene, ds, false);
  CHECK(cache.skip_boundary);
  CHECK(cache.snapshots.size() == 1);
  CHECK(cache.times.size() == ds.time_axis.supervised.size());
  CHECK(cache.times.front() == 1.0);
  CHECK(cache.times.back() == 0.0);

  // the interval k loss from snapshot 0 equals the loss of integrating the
  // full distance with proportionally more substeps
  TrainConfig c = oracle::small_train_config();
  field::VelocityField f(field_config_for(ds, c));
  oracle::randomize_field(f, 3);
  const auto s0 = cache.snapshots[0];
  const auto settings = render_settings(ds);
  const std::size_t target = ds.time_axis.supervised.front();
  IntervalProblem p{&scene, &s0, 1.0, 0.0, c.substeps * static_cast<int>(cache.intervals()), target};
  const double direct = interval_loss(p, {0}, ds, f, settings);
  CHECK(std::isfinite(direct));
  CHECK(direct > 0.0);
}

TEST_CASE("one-interval boundary loss gradient matches finite differences") {
  auto report = oracle::boundary_loss_gradient_check();
  CHECK_MESSAGE(report.max_rel_error <= 1e-4, report.worst_segment << "[" << report.worst_index << "] "
                                                                   << report.worst_analytic << " vs "
                                                                   << report.worst_numeric);
}

TEST_CASE("full pipeline: freeze, determinism, checkpoint round trip") {
  synth::GeneratedScene gen;
  const auto spec = oracle::small_spec(3);
  const auto ds = oracle::small_dataset(spec, &gen);
  TrainConfig c = oracle::small_train_config();

  auto run = [&](std::vector<double>* losses) {
    TrainedModel m;
    auto init = initialize_gaussians(ds, c, SeedPoints{synth::initialization_points(gen.truth)});
    m.scene = static_stage(ds, c, init);
    field::VelocityField f(field_config_for(ds, c));
    StageHistory hb, hg;
    m.cache = boundary_stage(m.scene, ds, f, c, {}, &hb);
    global_stage(m.scene, *m.cache, ds, f, c, {}, &hg);
    m.field = f;
    losses->insert(losses->end(), hb.losses.begin(), hb.losses.end());
    losses->insert(losses->end(), hg.losses.begin(), hg.losses.end());
    return m;
  };
  std::vector<double> la, lb;
  auto a = run(&la);
  auto b = run(&lb);
  CHECK(la == lb);
  CHECK(to_sections(a) == to_sections(b));

  // appearance and background never change after the static stage
  for (double t : {0.0, 0.1, 0.3, 0.5, 0.77, 1.0}) {
    auto q = query_time(a, t);
    CHECK(appearance_diff(q, a.scene) == 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (a.scene.foreground_mask[i]) continue;
      CHECK(q.center(i) == a.scene.center(i));
      CHECK(q.rotation(i) == a.scene.rotation(i));
      CHECK(q.log_scale(i) == a.scene.log_scale(i));
    }
  }

  auto dir = fs::temp_directory_path() / "growflow_train_model";
  fs::create_directories(dir);
  save_model(dir / "m.ckpt", a);
  auto back = load_model(dir / "m.ckpt");
  CHECK(to_sections(back) == to_sections(a));
  CHECK(back.scene == a.scene);
  CHECK(*back.cache == *a.cache);
}

TEST_CASE("query_time examples") {
  GaussianSet scene = small_scene();
  TrainedModel m;
  m.scene = scene;
  CHECK(query_time(m, 1.0) == scene);
  CHECK_THROWS_AS(query_time(m, 0.5), ContractError);
  CHECK_THROWS_AS(query_time(m, 1.5), ContractError);
  CHECK_THROWS_AS(query_time(m, -0.1), ContractError);

  // three cached snapshots, shifted in x
  BoundaryCache cache;
  cache.times = {1.0, 0.5, 0.0};
  for (int k = 0; k < 3; ++k) {
    auto s = ode::GeomState::foreground(scene, false);
    for (std::size_t i = 0; i < s.count(); ++i) s.centers()[3 * i] -= 0.1 * k;
    cache.snapshots.push_back(s);
  }
  m.cache = cache;
  auto cfg = oracle::tiny_field_config();
  m.field = field::VelocityField(cfg);

  // exact supervised time returns the snapshot
  auto q = query_time(m, 0.5);
  CHECK(ode::GeomState::foreground(q, false) == cache.snapshots[1]);

  // zero field: bracketing snapshot, nearer boundary
  auto q1 = query_time(m, 0.4);
  CHECK(ode::GeomState::foreground(q1, false) == cache.snapshots[1]);
  auto q2 = query_time(m, 0.2);
  CHECK(ode::GeomState::foreground(q2, false) == cache.snapshots[2]);
  auto q3 = query_time(m, 0.9);
  CHECK(ode::GeomState::foreground(q3, false) == cache.snapshots[0]);
}

TEST_CASE("query_time under a constant flow") {
  GaussianSet scene = small_scene();
  TrainedModel m;
  m.scene = scene;
  BoundaryCache cache;
  cache.times = {1.0, 0.0};
  cache.snapshots.push_back(ode::GeomState::foreground(scene, false));
  m.cache = cache;

  // constant velocity v: zero every weight except the mu head output bias
  field::VelocityField f(oracle::tiny_field_config());
  const Vec3 v(0.2, -0.1, 0.3);
  auto bias = f.params().values("head.mu.fc2.b");
  for (int d = 0; d < 3; ++d) bias[d] = v[d];
  m.field = f;

  auto q = query_time(m, 0.5 - 1e-9);
  auto s0 = cache.snapshots[0];
  const Vec3 dt = v * (0.5 - 1e-9 - 1.0);
  for (std::size_t i = 0; i < s0.count(); ++i) {
    const std::size_t idx = s0.indices[i];
    for (int d = 0; d < 3; ++d) CHECK(std::abs(q.center(idx)[d] - (s0.centers()[3 * i + d] + dt[d])) <= 1e-6);
  }
}

TEST_CASE("checkpoint files written during training") {
  const auto spec = oracle::small_spec();
  const auto ds = oracle::small_dataset(spec);
  TrainConfig c = oracle::small_train_config();
  c.checkpoint_every = 2;
  auto dir = fs::temp_directory_path() / "growflow_train_ckpts";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainIO io{nullptr, dir};
  auto scene = static_stage(ds, c, initialize_gaussians(ds, c, {}), io);
  field::VelocityField f(field_config_for(ds, c));
  auto cache = boundary_stage(scene, ds, f, c, io);
  global_stage(scene, cache, ds, f, c, io);
  CHECK(fs::exists(dir / "static_iter2.ckpt"));
  CHECK(fs::exists(dir / "boundary_iter2.ckpt"));
  CHECK(fs::exists(dir / "global_iter4.ckpt"));
  auto m = load_model(dir / "global_iter4.ckpt");
  CHECK(m.field.has_value());
  CHECK(m.cache.has_value());
}
