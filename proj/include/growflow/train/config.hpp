#pragma once

#include "growflow/field/velocity_field.hpp"
#include "growflow/ode/integrate.hpp"

#include <cstdint>

namespace growflow::train {

// Static-stage learning rates per Gaussian attribute. The position rate is
// multiplied by the scene extent.
struct StaticRates {
  double position = 1.6e-4;
  double rotation = 1e-3;
  double log_scale = 5e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;
};

struct DensifyConfig {
  bool enabled = false;
  int interval = 500;
  int stop_fraction_percent = 50;  // no densification after this share of the stage
  double grad_threshold = 2e-4;    // mean positional gradient norm (scene units)
  double percent_dense = 0.01;     // clone below, split above this share of the scene extent
  double prune_opacity = 0.005;
};

struct TrainConfig {
  int n_static = 30000;
  int n_boundary = 300;
  int n_global = 30000;
  double lr_grid = 1.6e-3;
  double lr_mlp = 1.6e-4;
  double lr_final_ratio = 0.1;
  StaticRates lr_static;
  int view_batch = 30;
  double ssim_lambda = 0.2;
  std::uint64_t seed = 0;
  DensifyConfig densify;
  bool skip_boundary = false;
  bool warm_start = false;  // global stage keeps the boundary-stage weights
  int substeps = 8;         // RK4 steps per supervised interval
  int init_count = 1000;    // uniform initialization count when no seed points exist
  double init_jitter = 0.01;  // seed-point jitter, share of the scene extent
  field::FieldConfig field;   // bounds are taken from the dataset
  int checkpoint_every = 1000;

  void validate() const;
};

}  // namespace growflow::train
