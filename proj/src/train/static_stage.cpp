#include "common.hpp"
#include "growflow/core/errors.hpp"
#include "growflow/core/quaternion.hpp"
#include "growflow/diff/parameter_store.hpp"
#include "growflow/train/adam.hpp"
#include "growflow/train/model.hpp"
#include "growflow/train/stages.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace growflow::train {

namespace {

diff::ParameterStore to_store(const GaussianSet& g) {
  diff::ParameterStore s;
  const std::size_t n = g.size();
  s.add("centers", {n, 3});
  s.add("rotations", {n, 4});
  s.add("log_scales", {n, 3});
  s.add("opacity_logits", {n});
  s.add("colors", {n, 3});
  std::ranges::copy(g.centers, s.values("centers").begin());
  std::ranges::copy(g.rotations, s.values("rotations").begin());
  std::ranges::copy(g.log_scales, s.values("log_scales").begin());
  std::ranges::copy(g.opacity_logits, s.values("opacity_logits").begin());
  std::ranges::copy(g.colors, s.values("colors").begin());
  return s;
}

void from_store(const diff::ParameterStore& s, GaussianSet& g) {
  std::ranges::copy(s.values("centers"), g.centers.begin());
  std::ranges::copy(s.values("rotations"), g.rotations.begin());
  std::ranges::copy(s.values("log_scales"), g.log_scales.begin());
  std::ranges::copy(s.values("opacity_logits"), g.opacity_logits.begin());
  std::ranges::copy(s.values("colors"), g.colors.begin());
}

void add_scaled(std::span<double> dst, const std::vector<double>& src, double s) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
}

// Clone small Gaussians with large positional gradients, split large ones,
// prune nearly transparent ones.
GaussianSet densify(const GaussianSet& g, const std::vector<double>& grad_sum, const std::vector<int>& grad_count,
                    const DensifyConfig& cfg, double extent, std::mt19937_64& rng) {
  GaussianSet out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (sigmoid(g.opacity_logits[i]) < cfg.prune_opacity) continue;
    const Vec3 c = g.center(i);
    const Vec4 q = g.rotation(i);
    const Vec3 ls = g.log_scale(i);
    const Vec3 col = g.color(i);
    const bool fg = g.foreground_mask[i] != 0;
    const double avg = grad_count[i] > 0 ? grad_sum[i] / grad_count[i] : 0.0;
    if (avg <= cfg.grad_threshold) {
      out.add(c, q, ls, g.opacity_logits[i], col, fg);
      continue;
    }
    const double max_scale = std::exp(ls.maxCoeff());
    if (max_scale <= cfg.percent_dense * extent) {
      out.add(c, q, ls, g.opacity_logits[i], col, fg);
      out.add(c, q, ls, g.opacity_logits[i], col, fg);
    } else {
      const Mat3 r = unit_quaternion_to_rotation_unchecked(normalize_quaternion(q));
      const Vec3 s = ls.array().exp();
      const Vec3 shrunk = ls.array() - std::log(1.6);
      for (int k = 0; k < 2; ++k) {
        const Vec3 offset = r * Vec3(s[0] * normal(rng), s[1] * normal(rng), s[2] * normal(rng));
        out.add(c + offset, q, shrunk, g.opacity_logits[i], col, fg);
      }
    }
  }
  return out;
}

}  // namespace

splat::RenderSettings render_settings(const TimedDataset& dataset) {
  splat::RenderSettings s;
  s.background = dataset.background;
  s.dilation = dataset.dilation;
  return s;
}

void assign_foreground(GaussianSet& g, const Box& foreground_box) {
  g.foreground_mask.assign(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) g.foreground_mask[i] = foreground_box.contains(Vec3(g.center(i))) ? 1 : 0;
}

GaussianSet initialize_gaussians(const TimedDataset& dataset, const TrainConfig& config, const SeedPoints& seeds) {
  std::mt19937_64 rng(config.seed ^ detail::kInitSalt);
  const double extent = detail::extent_of(dataset);
  std::vector<Vec3> points;
  if (!seeds.positions.empty()) {
    std::normal_distribution<double> jitter(0.0, config.init_jitter * extent);
    for (const auto& p : seeds.positions) points.emplace_back(p + Vec3(jitter(rng), jitter(rng), jitter(rng)));
  } else {
    if (config.init_count < 1) throw ConfigError("train: init_count must be >= 1 without seed points");
    const Box& box = dataset.foreground_box;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < config.init_count; ++i) {
      points.emplace_back(box.min + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(box.extent()));
    }
  }
  GaussianSet g;
  for (std::size_t i = 0; i < points.size(); ++i) {
    // Mean distance to the three nearest neighbours.
    std::vector<double> d;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j != i) d.push_back((points[i] - points[j]).norm());
    }
    const std::size_t k = std::min<std::size_t>(3, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double scale = 0.01 * extent;
    if (k > 0) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += d[j];
      scale = std::max(sum / static_cast<double>(k), 1e-7);
    }
    g.add(points[i], Vec4(1, 0, 0, 0), Vec3::Constant(std::log(scale)), logit(0.1), Vec3::Constant(0.5));
  }
  assign_foreground(g, dataset.foreground_box);
  return g;
}

GaussianSet static_stage(const TimedDataset& dataset, const TrainConfig& config, GaussianSet g, const TrainIO& io) {
  config.validate();
  g.validate();
  const std::size_t final_t = dataset.time_axis.final_index;
  const auto cameras = dataset.training_cameras();
  if (cameras.empty()) throw ConfigError("static stage: dataset has no training cameras");
  for (auto c : cameras) {
    if (!dataset.has_image(final_t, c)) {
      throw ConfigError("static stage: missing final-timestep image for camera " + std::to_string(c));
    }
  }
  const auto settings = render_settings(dataset);
  const double extent = detail::extent_of(dataset);
  splat::LossOptions loss_opts;
  loss_opts.kind = splat::LossKind::L1Ssim;
  loss_opts.ssim_lambda = config.ssim_lambda;

  std::mt19937_64 rng(config.seed ^ detail::kStaticSalt);
  auto store = to_store(g);
  Adam adam(store.size());
  std::vector<double> grad_sum(g.size(), 0.0);
  std::vector<int> grad_count(g.size(), 0);
  detail::Stopwatch watch;
  const double inv_batch = 1.0 / config.view_batch;

  for (int it = 0; it < config.n_static; ++it) {
    store.zero_grad();
    double loss = 0.0;
    for (auto cam : detail::sample_views(rng, cameras, config.view_batch)) {
      const auto r = splat::render_with_grads(g, dataset.cameras[cam], dataset.image(final_t, cam), loss_opts, settings);
      loss += inv_batch * r.loss;
      add_scaled(store.grads("centers"), r.grads.centers, inv_batch);
      add_scaled(store.grads("rotations"), r.grads.rotations, inv_batch);
      add_scaled(store.grads("log_scales"), r.grads.log_scales, inv_batch);
      add_scaled(store.grads("opacity_logits"), r.grads.opacity_logits, inv_batch);
      add_scaled(store.grads("colors"), r.grads.colors, inv_batch);
    }
    if (config.densify.enabled) {
      auto gc = store.grads("centers");
      for (std::size_t i = 0; i < g.size(); ++i) {
        grad_sum[i] += std::sqrt(gc[3 * i] * gc[3 * i] + gc[3 * i + 1] * gc[3 * i + 1] + gc[3 * i + 2] * gc[3 * i + 2]);
        ++grad_count[i];
      }
    }

    const double pos_lr = decayed_rate(config.lr_static.position * extent, config.lr_final_ratio, it, config.n_static);
    adam.step(store, [&](const diff::Segment& seg) {
      if (seg.name == "centers") return pos_lr;
      if (seg.name == "rotations") return config.lr_static.rotation;
      if (seg.name == "log_scales") return config.lr_static.log_scale;
      if (seg.name == "opacity_logits") return config.lr_static.opacity;
      return config.lr_static.color;
    });
    for (double& c : store.values("colors")) c = std::clamp(c, 0.0, 1.0);
    from_store(store, g);

    detail::log_line(io.log, "static", it, 0, loss, watch.lap_ms());

    const int stop = config.n_static * config.densify.stop_fraction_percent / 100;
    if (config.densify.enabled && it > 0 && it < stop && it % config.densify.interval == 0) {
      g = densify(g, grad_sum, grad_count, config.densify, extent, rng);
      assign_foreground(g, dataset.foreground_box);
      store = to_store(g);
      adam.reset(store.size());
      grad_sum.assign(g.size(), 0.0);
      grad_count.assign(g.size(), 0);
    }
    if (!io.checkpoint_dir.empty() && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0) {
      TrainedModel m;
      m.scene = g;
      save_model(io.checkpoint_dir / ("static_iter" + std::to_string(it + 1) + ".ckpt"), m);
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec4 q = normalize_quaternion(g.rotation(i));
    for (int d = 0; d < 4; ++d) g.rotations[4 * i + d] = q[d];
  }
  assign_foreground(g, dataset.foreground_box);
  return g;
}

}  // namespace growflow::train
