#include "common.hpp"
#include "growflow/core/errors.hpp"
#include "growflow/ode/taped.hpp"
#include "growflow/splat/render_op.hpp"
#include "growflow/train/adam.hpp"
#include "growflow/train/model.hpp"
#include "growflow/train/stages.hpp"

#include <array>
#include <string>

namespace growflow::train {

namespace {

// Supervised timestep indices, fully grown first.
std::vector<std::size_t> supervised_descending(const TimedDataset& dataset) {
  std::vector<std::size_t> out(dataset.time_axis.supervised.rbegin(), dataset.time_axis.supervised.rend());
  return out;
}

RateFn field_rates(const field::VelocityField& field, const TrainConfig& config, int iter, int total) {
  const double grid = decayed_rate(config.lr_grid, config.lr_final_ratio, iter, total);
  const double mlp = decayed_rate(config.lr_mlp, config.lr_final_ratio, iter, total);
  return [&field, grid, mlp](const diff::Segment& seg) {
    return field.group(seg) == field::ParamGroup::Grid ? grid : mlp;
  };
}

void check_dataset(const TimedDataset& dataset, const std::vector<std::size_t>& cameras) {
  if (cameras.empty()) throw ConfigError("flow stages: dataset has no training cameras");
  for (auto t : dataset.time_axis.supervised) {
    for (auto c : cameras) {
      if (!dataset.has_image(t, c)) {
        throw ConfigError("flow stages: missing image for timestep " + std::to_string(dataset.time_axis.raw_timesteps[t]) +
                          ", camera " + std::to_string(c));
      }
    }
  }
}

void maybe_checkpoint(const TrainIO& io, const TrainConfig& config, const std::string& stage, int done,
                      const GaussianSet& scene, const BoundaryCache& cache, const field::VelocityField& field) {
  if (io.checkpoint_dir.empty() || config.checkpoint_every <= 0 || done % config.checkpoint_every != 0) return;
  TrainedModel m;
  m.scene = scene;
  m.cache = cache;
  m.field = field;
  save_model(io.checkpoint_dir / (stage + "_iter" + std::to_string(done) + ".ckpt"), m);
}

}  // namespace

double interval_loss(const IntervalProblem& p, const std::vector<std::size_t>& views, const TimedDataset& dataset,
                     field::VelocityField& field, const splat::RenderSettings& settings) {
  const auto& s = *p.start;
  const GaussianSet& scene = *p.scene;
  const std::size_t n = s.count();
  diff::Tape tape;
  auto bound = field.bind(tape);
  auto deriv = ode::taped_field_derivative(field, bound, n);
  auto y = ode::taped_rk4(tape, deriv, tape.view(s.values), p.t0, p.t1, p.substeps, n);

  splat::GaussianVars vars;
  vars.centers = tape.scatter(tape.view(scene.centers), tape.slice(y, 0, 3 * n), s.indices, 3);
  vars.rotations = tape.scatter(tape.view(scene.rotations), tape.slice(y, 3 * n, 4 * n), s.indices, 4);
  vars.log_scales = tape.scatter(tape.view(scene.log_scales), tape.slice(y, 7 * n, 3 * n), s.indices, 3);
  vars.opacity_logits = tape.view(scene.opacity_logits);
  vars.colors = s.with_color ? tape.scatter(tape.view(scene.colors), tape.slice(y, 10 * n, 3 * n), s.indices, 3)
                             : tape.view(scene.colors);

  std::vector<std::pair<double, diff::Var>> terms;
  const double w = 1.0 / static_cast<double>(views.size());
  for (auto cam : views) {
    auto image = splat::render_op(tape, vars, dataset.cameras[cam], settings);
    terms.emplace_back(w, tape.l1_loss(image, dataset.image(p.target_time, cam).data()));
  }
  auto loss = tape.lincomb(terms);
  if (n > 0) tape.backward(loss);
  return tape.scalar(loss);
}

field::FieldConfig field_config_for(const TimedDataset& dataset, const TrainConfig& config) {
  field::FieldConfig c = config.field;
  c.bounds = dataset.scene_bounds;
  return c;
}

BoundaryCache degenerate_cache(const GaussianSet& scene, const TimedDataset& dataset, bool with_color) {
  BoundaryCache cache;
  for (auto t : supervised_descending(dataset)) cache.times.push_back(dataset.time_axis.normalized[t]);
  cache.snapshots.push_back(ode::GeomState::foreground(scene, with_color));
  cache.skip_boundary = true;
  return cache;
}

BoundaryCache boundary_stage(const GaussianSet& scene, const TimedDataset& dataset, field::VelocityField& field,
                             const TrainConfig& config, const TrainIO& io, StageHistory* history) {
  config.validate();
  const auto cameras = dataset.training_cameras();
  check_dataset(dataset, cameras);
  const auto settings = render_settings(dataset);
  const auto order = supervised_descending(dataset);
  const bool with_color = field.config().color_flow;

  BoundaryCache cache = degenerate_cache(scene, dataset, with_color);
  cache.skip_boundary = false;
  std::mt19937_64 rng(config.seed ^ detail::kBoundarySalt);
  Adam adam(field.params().size());
  detail::Stopwatch watch;
  if (history) history->losses.clear();
  int done = 0;

  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const IntervalProblem p{&scene, &cache.snapshots[k], cache.times[k], cache.times[k + 1], config.substeps, order[k + 1]};
    try {
      for (int it = 0; it < config.n_boundary; ++it) {
        field.params().zero_grad();
        const double loss = interval_loss(p, detail::sample_views(rng, cameras, config.view_batch), dataset, field, settings);
        adam.step(field.params(), field_rates(field, config, it, config.n_boundary));
        detail::log_line(io.log, "boundary", it, static_cast<int>(k), loss, watch.lap_ms());
        if (history) history->losses.push_back(loss);
        maybe_checkpoint(io, config, "boundary", ++done, scene, cache, field);
      }
      ode::IntegrationOptions opts;
      opts.substeps = config.substeps;
      cache.snapshots.push_back(ode::integrate_state(field, cache.snapshots[k], p.t0, p.t1, opts));
    } catch (const NumericalError& e) {
      throw NumericalError("boundary stage failed on interval " + std::to_string(k) + ": " + e.what());
    }
  }
  return cache;
}

void global_stage(const GaussianSet& scene, const BoundaryCache& cache, const TimedDataset& dataset,
                  field::VelocityField& field, const TrainConfig& config, const TrainIO& io, StageHistory* history) {
  config.validate();
  if (cache.snapshots.empty() || cache.intervals() == 0) throw ContractError("global stage: empty boundary cache");
  const auto cameras = dataset.training_cameras();
  check_dataset(dataset, cameras);
  const auto settings = render_settings(dataset);
  const auto order = supervised_descending(dataset);
  if (order.size() != cache.times.size()) throw ContractError("global stage: cache does not match the dataset");

  if (!config.warm_start) field.reinitialize();
  std::mt19937_64 rng(config.seed ^ detail::kGlobalSalt);
  std::uniform_int_distribution<std::size_t> pick_interval(0, cache.intervals() - 1);
  Adam adam(field.params().size());
  detail::Stopwatch watch;
  if (history) history->losses.clear();

  for (int it = 0; it < config.n_global; ++it) {
    const std::size_t k = pick_interval(rng);
    // Without cached boundaries every interval starts from the fully grown state.
    const std::size_t start = k < cache.snapshots.size() ? k : 0;
    const int substeps = config.substeps * static_cast<int>(k + 1 - start);
    const IntervalProblem p{&scene, &cache.snapshots[start], cache.times[start], cache.times[k + 1], substeps, order[k + 1]};
    field.params().zero_grad();
    double loss = 0.0;
    try {
      loss = interval_loss(p, detail::sample_views(rng, cameras, config.view_batch), dataset, field, settings);
    } catch (const NumericalError& e) {
      throw NumericalError("global stage failed on interval " + std::to_string(k) + ": " + e.what());
    }
    adam.step(field.params(), field_rates(field, config, it, config.n_global));
    detail::log_line(io.log, "global", it, static_cast<int>(k), loss, watch.lap_ms());
    if (history) history->losses.push_back(loss);
    maybe_checkpoint(io, config, "global", it + 1, scene, cache, field);
  }
}

}  // namespace growflow::train
