#pragma once

#include "growflow/core/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace growflow {

// Posed images indexed by (timestep index into time_axis, camera index).
struct TimedDataset {
  std::vector<Camera> cameras;
  std::map<std::pair<std::size_t, std::size_t>, Image> images;
  std::map<std::pair<std::size_t, std::size_t>, Mask> masks;
  TimeAxis time_axis;
  Box scene_bounds;
  Box foreground_box;
  std::vector<std::size_t> held_out_cameras;
  Vec3 background = Vec3::Ones();
  double dilation = 0.3;

  const Image& image(std::size_t timestep, std::size_t camera) const;
  const Mask* mask(std::size_t timestep, std::size_t camera) const;
  bool has_image(std::size_t timestep, std::size_t camera) const;

  bool is_held_out(std::size_t camera) const;
  std::vector<std::size_t> training_cameras() const;

  // Throws DataError on shape mismatches or a foreground box outside the scene.
  void validate() const;
};

// Directory layout:
//   cameras.json
//   times.json
//   images/t{k}/cam{p}.png
//   masks/t{k}/cam{p}.png   (optional)
// where k is the raw timestep and p the camera index.
TimedDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const TimedDataset& dataset, const std::filesystem::path& dir);

}  // namespace growflow
