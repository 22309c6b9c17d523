#include "growflow/train/config.hpp"

#include "growflow/core/errors.hpp"

namespace growflow::train {

void TrainConfig::validate() const {
  if (n_static < 1 || n_boundary < 1 || n_global < 1) throw ConfigError("train: iteration counts must be >= 1");
  if (!(lr_grid > 0) || !(lr_mlp > 0)) throw ConfigError("train: learning rates must be > 0");
  if (!(lr_final_ratio > 0) || lr_final_ratio > 1) throw ConfigError("train: lr_final_ratio must be in (0, 1]");
  const auto& s = lr_static;
  if (!(s.position > 0) || !(s.rotation > 0) || !(s.log_scale > 0) || !(s.opacity > 0) || !(s.color > 0)) {
    throw ConfigError("train: static learning rates must be > 0");
  }
  if (view_batch < 1) throw ConfigError("train: view_batch must be >= 1");
  if (ssim_lambda < 0 || ssim_lambda > 1) throw ConfigError("train: ssim_lambda must be in [0, 1]");
  if (substeps < 1) throw ConfigError("train: substeps must be >= 1");
  if (init_count < 0) throw ConfigError("train: init_count must be >= 0");
  if (init_jitter < 0) throw ConfigError("train: init_jitter must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  if (densify.interval < 1) throw ConfigError("train: densify.interval must be >= 1");
}

}  // namespace growflow::train
