#pragma once

#include "growflow/core/dataset.hpp"
#include "growflow/field/velocity_field.hpp"
#include "growflow/ode/geom_state.hpp"
#include "growflow/splat/render.hpp"
#include "growflow/train/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace growflow::train {

// Snapshots of the foreground geometry at supervised times, produced backward
// from the fully grown state: snapshot k lives at times[k], with times[0] = 1.
// `times` always lists every supervised time in descending order; with
// skip_boundary only snapshot 0 is present.
struct BoundaryCache {
  std::vector<double> times;
  std::vector<ode::GeomState> snapshots;
  bool skip_boundary = false;

  std::size_t intervals() const { return times.empty() ? 0 : times.size() - 1; }
  bool operator==(const BoundaryCache&) const = default;
};

// Where stages write the training log and periodic checkpoints. Both optional.
struct TrainIO {
  std::ostream* log = nullptr;
  std::filesystem::path checkpoint_dir;
};

// Seed points for the static initialization (e.g. the final-time points of a
// synthetic scene). Empty means uniform sampling inside the foreground box.
struct SeedPoints {
  std::vector<Vec3> positions;
};

splat::RenderSettings render_settings(const TimedDataset& dataset);

// Isotropic Gaussians at jittered seed points with nearest-neighbour scale,
// color 0.5, opacity 0.1 and identity rotation.
GaussianSet initialize_gaussians(const TimedDataset& dataset, const TrainConfig& config, const SeedPoints& seeds);

// Marks Gaussians whose center lies in the foreground box.
void assign_foreground(GaussianSet& g, const Box& foreground_box);

GaussianSet static_stage(const TimedDataset& dataset, const TrainConfig& config, GaussianSet init,
                         const TrainIO& io = {});

// Per-iteration mean loss of the most recent stage run, for diagnostics.
struct StageHistory {
  std::vector<double> losses;
};

// One supervised interval: integrate `start` from t0 to t1 and compare the
// renders against the images of timestep `target_time`.
struct IntervalProblem {
  const GaussianSet* scene;
  const ode::GeomState* start;
  double t0;
  double t1;
  int substeps;
  std::size_t target_time;
};

// Integrates one interval on a tape, renders `views` and backpropagates the
// mean L1 loss into the field's gradient buffer. Returns the loss.
double interval_loss(const IntervalProblem& problem, const std::vector<std::size_t>& views,
                     const TimedDataset& dataset, field::VelocityField& field, const splat::RenderSettings& settings);

BoundaryCache boundary_stage(const GaussianSet& scene, const TimedDataset& dataset, field::VelocityField& field,
                             const TrainConfig& config, const TrainIO& io = {}, StageHistory* history = nullptr);

// Cache with only the fully grown snapshot (skip-boundary ablation).
BoundaryCache degenerate_cache(const GaussianSet& scene, const TimedDataset& dataset, bool with_color);

// Trains the field on randomly sampled single intervals starting from cached
// snapshots. The field is reinitialized unless config.warm_start is set.
void global_stage(const GaussianSet& scene, const BoundaryCache& cache, const TimedDataset& dataset,
                  field::VelocityField& field, const TrainConfig& config, const TrainIO& io = {},
                  StageHistory* history = nullptr);

// Field configuration for a dataset: config.field with bounds set to the
// scene bounds.
field::FieldConfig field_config_for(const TimedDataset& dataset, const TrainConfig& config);

}  // namespace growflow::train
