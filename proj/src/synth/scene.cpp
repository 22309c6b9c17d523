#include "growflow/synth/scene.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <random>

namespace growflow::synth {

namespace {

constexpr double kInitialLength = 0.65;  // stem length at t = 0, share of the final length
constexpr double kStemRadius = 0.045;
constexpr double kBranchRadius = 0.05;
constexpr double kEmergeDelay = 0.1;     // between consecutive branch points
constexpr double kEmergeDuration = 0.3;  // radius ramp length

double growth(GrowthCurve curve, double x) {
  x = std::clamp(x, 0.0, 1.0);
  return curve == GrowthCurve::Linear ? x : x * x * (3.0 - 2.0 * x);
}

struct Stem {
  Vec3 base;
  Vec3 bend;  // lateral offset at the tip
  double height;
  Vec3 at(double s) const { return base + s * s * bend + Vec3(0, 0, s * height); }
};

}  // namespace

void SceneSpec::validate() const {
  if (n_stems < 1 || n_gaussians < 1 || n_timesteps < 1 || camera_count < 1) {
    throw ConfigError("scene: counts must be >= 1");
  }
  if (n_branch_events < 0) throw ConfigError("scene: n_branch_events must be >= 0");
  if (n_timesteps < 2) throw ConfigError("scene: n_timesteps must be >= 2");
  if (n_gaussians < n_stems + n_branch_events) {
    throw ConfigError("scene: n_gaussians must cover one point per stem and branch");
  }
  if (image_size < 16) throw ConfigError("scene: image_size must be >= 16");
  if (supervised_stride < 1) throw ConfigError("scene: supervised_stride must be >= 1");
  if (held_out_every < 1) throw ConfigError("scene: held_out_every must be >= 1");
  if ((background.array() < 0.0).any() || (background.array() > 1.0).any()) {
    throw ConfigError("scene: background must be in [0, 1]");
  }
}

std::size_t GroundTruth::alive_count(std::size_t timestep) const {
  const auto& r = radii.at(timestep);
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0.0; }));
}

double GroundTruth::volume(std::size_t timestep) const {
  double v = 0.0;
  for (double r : radii.at(timestep)) v += r * r * r;
  return v;
}

GeneratedScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  GeneratedScene scene;
  GroundTruth& gt = scene.truth;
  gt.foreground_box = Box{Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 1.0)};
  gt.scene_bounds = Box{Vec3(-1.2, -1.2, -0.2), Vec3(1.2, 1.2, 1.1)};

  std::vector<int> raw(static_cast<std::size_t>(spec.n_timesteps));
  for (int k = 0; k < spec.n_timesteps; ++k) raw[k] = k;
  scene.time_axis = TimeAxis::from_raw(raw, static_cast<std::size_t>(spec.supervised_stride));
  gt.times = scene.time_axis.normalized;
  const std::size_t n_t = gt.times.size();

  // Point budget: branches get a share, stems split the rest.
  const int per_branch =
      spec.n_branch_events > 0 ? std::max(1, spec.n_gaussians / (2 * spec.n_stems + spec.n_branch_events)) : 0;
  const int stem_total = spec.n_gaussians - per_branch * spec.n_branch_events;

  std::vector<Stem> stems;
  for (int s = 0; s < spec.n_stems; ++s) {
    const double rho = uniform(0.03, 0.1);
    const double phi = uniform(0.0, 2.0 * std::numbers::pi);
    const double psi = uniform(0.0, 2.0 * std::numbers::pi);
    const double bend = uniform(0.03, 0.08);
    stems.push_back(Stem{Vec3(rho * std::cos(phi), rho * std::sin(phi), 0.02),
                         Vec3(bend * std::cos(psi), bend * std::sin(psi), 0.0), uniform(0.75, 0.9)});
  }

  // Each point is a closure from normalized time to (position, radius).
  struct Track {
    std::function<Vec3(double)> position;
    std::function<double(double)> radius;
  };
  std::vector<Track> tracks;
  const auto length = [&](double t) { return kInitialLength + (1.0 - kInitialLength) * growth(spec.growth_curve, t); };

  for (int s = 0; s < spec.n_stems; ++s) {
    const int m = stem_total / spec.n_stems + (s < stem_total % spec.n_stems ? 1 : 0);
    const Vec3 dark = s % 2 == 0 ? Vec3(0.10, 0.35, 0.08) : Vec3(0.25, 0.35, 0.05);
    const Vec3 light = s % 2 == 0 ? Vec3(0.45, 0.80, 0.25) : Vec3(0.75, 0.80, 0.20);
    const double r = kStemRadius + uniform(-0.005, 0.005);
    for (int j = 0; j < m; ++j) {
      const double frac = static_cast<double>(j + 1) / m;
      const Stem stem = stems[s];
      tracks.push_back({[stem, frac, length](double t) -> Vec3 { return stem.at(frac * length(t)); },
                        [r](double) { return r; }});
      gt.colors.push_back(dark + frac * (light - dark));
      gt.birth.push_back(0.0);
    }
  }
  for (int e = 0; e < spec.n_branch_events; ++e) {
    const Stem stem = stems[e % spec.n_stems];
    const double attach = uniform(0.45, 0.65);
    const double az = uniform(0.0, 2.0 * std::numbers::pi);
    const double el = 25.0 * std::numbers::pi / 180.0;
    const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const double len = uniform(0.22, 0.28);
    const double born = uniform(0.15, 0.3);
    // long branches emerge faster so the last point is fully grown at t = 1
    const double delay =
        per_branch > 1 ? std::min(kEmergeDelay, (1.0 - kEmergeDuration - born) / (per_branch - 1)) : kEmergeDelay;
    for (int j = 0; j < per_branch; ++j) {
      const Vec3 offset = (static_cast<double>(j + 1) / per_branch) * len * dir;
      const double bj = born + delay * j;
      const GrowthCurve curve = spec.growth_curve;
      tracks.push_back({[stem, attach, offset, length](double t) -> Vec3 { return stem.at(attach * length(t)) + offset; },
                        [bj, curve](double t) { return kBranchRadius * growth(curve, (t - bj) / kEmergeDuration); }});
      gt.colors.push_back(Vec3(0.85, 0.30 + 0.1 * j, 0.45));
      gt.birth.push_back(bj);
    }
  }

  gt.positions.assign(n_t, {});
  gt.radii.assign(n_t, {});
  for (std::size_t k = 0; k < n_t; ++k) {
    for (const auto& tr : tracks) {
      gt.positions[k].push_back(tr.position(gt.times[k]));
      gt.radii[k].push_back(tr.radius(gt.times[k]));
    }
  }

  // Floor of flat static Gaussians below the plant.
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = -1; iy <= 1; ++iy) {
      const Vec3 color = (ix + iy) % 2 == 0 ? Vec3(0.55, 0.45, 0.35) : Vec3(0.35, 0.28, 0.20);
      gt.backdrop.add(Vec3(0.9 * ix, 0.9 * iy, -0.08), Vec4(1, 0, 0, 0),
                      Vec3(std::log(0.5), std::log(0.5), std::log(0.02)), logit(kPointOpacity), color, false);
    }
  }

  // Orbit rig.
  const Vec3 target(0.0, 0.0, 0.45);
  const double radius = 2.0;
  const double elevation = 20.0 * std::numbers::pi / 180.0;
  const double focal = 0.5 * spec.image_size / std::tan(18.0 * std::numbers::pi / 180.0);
  for (int c = 0; c < spec.camera_count; ++c) {
    const double a = 2.0 * std::numbers::pi * c / spec.camera_count;
    const Vec3 eye = target + radius * Vec3(std::cos(elevation) * std::cos(a), std::cos(elevation) * std::sin(a),
                                            std::sin(elevation));
    scene.cameras.push_back(Camera::look_at(eye, target, Vec3(0, 0, 1), focal, spec.image_size, spec.image_size));
    if (c % spec.held_out_every == 0) scene.held_out.push_back(static_cast<std::size_t>(c));
  }
  return scene;
}

GaussianSet gaussians_at(const GroundTruth& truth, std::size_t timestep) {
  GaussianSet g;
  const auto& pos = truth.positions.at(timestep);
  const auto& rad = truth.radii.at(timestep);
  for (std::size_t i = 0; i < truth.point_count(); ++i) {
    if (!(rad[i] > 0.0)) continue;
    g.add(pos[i], Vec4(1, 0, 0, 0), Vec3::Constant(std::log(rad[i])), logit(kPointOpacity), truth.colors[i], true);
  }
  const auto& b = truth.backdrop;
  for (std::size_t i = 0; i < b.size(); ++i) {
    g.add(b.center(i), b.rotation(i), b.log_scale(i), b.opacity_logits[i], b.color(i), false);
  }
  return g;
}

std::vector<Vec3> initialization_points(const GroundTruth& truth) {
  std::vector<Vec3> out(truth.positions.back().begin(), truth.positions.back().end());
  // 2x2 samples over each backdrop tile
  const auto& b = truth.backdrop;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Mat3 r = unit_quaternion_to_rotation_unchecked(normalize_quaternion(b.rotation(i)));
    const Vec3 s = b.log_scale(i).array().exp();
    for (double u : {-0.45, 0.45})
      for (double v : {-0.45, 0.45}) out.emplace_back(Vec3(b.center(i)) + r * Vec3(u * s[0], v * s[1], 0.0));
  }
  return out;
}

}  // namespace growflow::synth
