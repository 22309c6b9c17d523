#pragma once

#include "growflow/core/dataset.hpp"
#include "growflow/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace growflow::synth {

enum class GrowthCurve { Linear, Smoothstep };

struct SceneSpec {
  int n_stems = 2;
  int n_branch_events = 1;
  int n_gaussians = 16;  // foreground points
  int n_timesteps = 8;
  int camera_count = 16;
  int image_size = 64;
  GrowthCurve growth_curve = GrowthCurve::Linear;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Ones();
  int supervised_stride = 2;
  int held_out_every = 10;

  void validate() const;
};

// Material points of the plant. Index i is the same point at every timestep;
// points that have not emerged yet have radius 0.
struct GroundTruth {
  std::vector<double> times;  // normalized, one per timestep
  std::vector<std::vector<Vec3>> positions;  // [timestep][point]
  std::vector<std::vector<double>> radii;    // [timestep][point]
  std::vector<Vec3> colors;
  std::vector<double> birth;  // normalized emergence time
  GaussianSet backdrop;       // static floor, outside the foreground box
  Box foreground_box;
  Box scene_bounds;

  std::size_t point_count() const { return colors.size(); }
  std::size_t alive_count(std::size_t timestep) const;
  double volume(std::size_t timestep) const;  // sum of radius^3

  bool operator==(const GroundTruth&) const = default;
};

struct GeneratedScene {
  GroundTruth truth;
  std::vector<Camera> cameras;
  TimeAxis time_axis;
  std::vector<std::size_t> held_out;
};

GeneratedScene generate_scene(const SceneSpec& spec);

inline constexpr double kPointOpacity = 0.95;

// Isotropic Gaussians for the emerged points at one timestep, plus the backdrop.
GaussianSet gaussians_at(const GroundTruth& truth, std::size_t timestep);

// Final-time point positions followed by four points on each backdrop tile.
std::vector<Vec3> initialization_points(const GroundTruth& truth);

// Renders every (timestep, camera) view with the brute-force renderer and
// returns the dataset (images, foreground masks at alpha >= 0.5).
TimedDataset render_dataset(const GeneratedScene& scene, const SceneSpec& spec);

// Writes the dataset layout plus ground_truth.json into `dir`.
void write_scene(const GeneratedScene& scene, const TimedDataset& dataset, const std::filesystem::path& dir);

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace growflow::synth
