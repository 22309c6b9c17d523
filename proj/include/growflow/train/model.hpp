#pragma once

#include "growflow/core/checkpoint.hpp"
#include "growflow/field/velocity_field.hpp"
#include "growflow/ode/integrate.hpp"
#include "growflow/train/stages.hpp"

#include <filesystem>
#include <optional>

namespace growflow::train {

// Everything needed to answer time queries: the static scene, the boundary
// cache and the trained field. Partially trained models leave the later
// parts empty.
struct TrainedModel {
  GaussianSet scene;
  std::optional<BoundaryCache> cache;
  std::optional<field::VelocityField> field;
};

CheckpointSections to_sections(const TrainedModel& model);
TrainedModel from_sections(const CheckpointSections& sections);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

// Adaptive integration defaults for queries.
ode::IntegrationOptions query_options();

// Scene at normalized time t: integrates from the nearer cached boundary of
// the bracketing supervised interval and substitutes the foreground geometry.
GaussianSet query_time(const TrainedModel& model, double t, const ode::IntegrationOptions& options = query_options());

}  // namespace growflow::train
