#pragma once

#include "growflow/ode/integrate.hpp"
#include "growflow/synth/scene.hpp"
#include "growflow/train/config.hpp"

#include <filesystem>
#include <string>

namespace growflow::cli {

struct Paths {
  std::string dataset;
  std::string output;
  std::string checkpoint;
};

// One JSON document configuring a run. Every field is optional; unknown keys
// are rejected with ConfigError naming the key path (e.g. "train.lr_grdi").
struct RunConfig {
  synth::SceneSpec scene;
  train::TrainConfig train;
  ode::IntegrationOptions integration;  // used for time queries; adaptive by default
  Paths paths;

  RunConfig();
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& config);

}  // namespace growflow::cli
