#include "growflow/cli/run_config.hpp"
#include "growflow/core/errors.hpp"
#include "growflow/core/image_io.hpp"
#include "growflow/metrics/report.hpp"
#include "growflow/splat/render.hpp"
#include "growflow/synth/scene.hpp"
#include "growflow/train/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace growflow;

namespace {

cli::RunConfig load_config(const std::string& path) {
  return path.empty() ? cli::RunConfig{} : cli::load_run_config(path);
}

std::string require_path(const std::string& flag, const std::string& config_value, const std::string& name) {
  const std::string& v = flag.empty() ? config_value : flag;
  if (v.empty()) throw ConfigError("missing " + name);
  return v;
}

void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t must be in [0, 1]");
}

std::vector<double> parse_times(const std::string& spec, const TimedDataset* dataset) {
  if (spec.empty()) {
    if (!dataset) throw ConfigError("--times is required without a dataset");
    return dataset->time_axis.normalized;
  }
  std::vector<double> out;
  if (spec.find(',') == std::string::npos) {
    int n = 0;
    try {
      n = std::stoi(spec);
    } catch (const std::exception&) {
      throw ConfigError("--times must be a count or a comma-separated list");
    }
    if (n < 2) throw ConfigError("--times count must be >= 2");
    for (int k = 0; k < n; ++k) out.push_back(static_cast<double>(k) / (n - 1));
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--times: cannot parse '" + item + "'");
    }
    check_t(out.back());
  }
  return out;
}

int cmd_gen(const std::string& config_path, const std::string& out_flag) {
  const auto config = load_config(config_path);
  const fs::path out = require_path(out_flag, config.paths.dataset, "output directory (--out)");
  const auto scene = synth::generate_scene(config.scene);
  const auto dataset = synth::render_dataset(scene, config.scene);
  synth::write_scene(scene, dataset, out);
  const auto& b = dataset.scene_bounds;
  std::cout << "timesteps\t" << dataset.time_axis.size() << "\n"
            << "supervised\t" << dataset.time_axis.supervised.size() << "\n"
            << "cameras\t" << dataset.cameras.size() << "\n"
            << "held_out\t" << dataset.held_out_cameras.size() << "\n"
            << "images\t" << dataset.images.size() << "\n"
            << "points\t" << scene.truth.point_count() << "\n"
            << "scene_bounds\t" << b.min.transpose() << " .. " << b.max.transpose() << "\n";
  return 0;
}

struct TrainFlags {
  std::string dataset;
  std::string config;
  std::string out;
  std::string stage = "all";
  bool skip_boundary = false;
  std::string encoder;
  bool color_flow = false;
};

int cmd_train(const TrainFlags& flags) {
  if (flags.stage != "all" && flags.stage != "static" && flags.stage != "boundary" && flags.stage != "global") {
    throw ConfigError("--stage must be all, static, boundary or global");
  }
  auto config = load_config(flags.config);
  auto& tc = config.train;
  if (flags.skip_boundary) tc.skip_boundary = true;
  if (flags.encoder == "fourier") tc.field.encoder = field::EncoderKind::FourierMlp;
  if (flags.encoder == "hexplane") tc.field.encoder = field::EncoderKind::HexPlane;
  if (flags.color_flow) tc.field.color_flow = true;
  tc.validate();

  const fs::path data_dir = require_path(flags.dataset, config.paths.dataset, "dataset directory (--dataset)");
  const fs::path out = require_path(flags.out, config.paths.output, "output directory (--out)");
  fs::create_directories(out / "checkpoints");
  const auto dataset = load_dataset(data_dir);
  std::ofstream log(out / "train_log.tsv", std::ios::app);
  train::TrainIO io{&log, out / "checkpoints"};

  const bool all = flags.stage == "all";
  const auto load_stage = [&](const std::string& name, const std::string& needed_by) {
    const fs::path p = out / (name + ".ckpt");
    if (!fs::exists(p)) throw ConfigError("stage '" + needed_by + "' needs the " + name + " checkpoint " + p.string());
    return train::load_model(p);
  };

  train::TrainedModel model;
  if (all || flags.stage == "static") {
    train::SeedPoints seeds;
    if (fs::exists(data_dir / "ground_truth.json")) {
      seeds.positions = synth::initialization_points(synth::load_ground_truth(data_dir / "ground_truth.json"));
    }
    const auto init = train::initialize_gaussians(dataset, tc, seeds);
    model.scene = train::static_stage(dataset, tc, init, io);
    train::save_model(out / "static.ckpt", model);
    std::cerr << "static stage done: " << model.scene.size() << " Gaussians\n";
  }
  if (all || flags.stage == "boundary") {
    if (!all) model = load_stage("static", "boundary");
    field::VelocityField field(train::field_config_for(dataset, tc));
    if (tc.skip_boundary) {
      model.cache = train::degenerate_cache(model.scene, dataset, field.config().color_flow);
    } else {
      model.cache = train::boundary_stage(model.scene, dataset, field, tc, io);
    }
    model.field = field;
    train::save_model(out / "boundary.ckpt", model);
    std::cerr << "boundary stage done: cache length " << model.cache->snapshots.size() << "\n";
  }
  if (all || flags.stage == "global") {
    if (!all) model = load_stage("boundary", "global");
    if (!model.cache) throw ConfigError("stage 'global' needs a boundary cache");
    if (!model.field || model.field->config().encoder != tc.field.encoder ||
        model.field->config().color_flow != tc.field.color_flow) {
      model.field.emplace(train::field_config_for(dataset, tc));
    }
    train::global_stage(model.scene, *model.cache, dataset, *model.field, tc, io);
    train::save_model(out / "model.ckpt", model);
    std::cerr << "global stage done\n";
  }
  return 0;
}

Image render_at(const train::TrainedModel& model, const TimedDataset& dataset, std::size_t camera, double t,
                const ode::IntegrationOptions& options) {
  if (camera >= dataset.cameras.size()) throw ConfigError("camera index out of range");
  const auto scene = train::query_time(model, t, options);
  splat::RenderSettings settings;
  settings.background = dataset.background;
  settings.dilation = dataset.dilation;
  return splat::render(scene, dataset.cameras[camera], settings);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruct and query continuous-time growth of Gaussian-splat scenes"};
  app.require_subcommand(1);

  std::string config_path, out, dataset_dir, checkpoint, times_spec;
  std::size_t camera = 0;
  double t = 1.0;
  int column = 0, count = 8;
  std::uint64_t seed = 0;
  TrainFlags tf;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic growing-plant dataset");
  gen->add_option("--config", config_path, "Run configuration JSON");
  gen->add_option("--out", out, "Output dataset directory");

  auto* trn = app.add_subcommand("train", "Run training stages");
  trn->add_option("--dataset", tf.dataset, "Dataset directory");
  trn->add_option("--config", tf.config, "Run configuration JSON");
  trn->add_option("--out", tf.out, "Output directory for checkpoints and the training log");
  trn->add_option("--stage", tf.stage, "all | static | boundary | global");
  trn->add_flag("--skip-boundary", tf.skip_boundary, "Skip boundary reconstruction (ablation)");
  trn->add_option("--encoder", tf.encoder, "hexplane | fourier")->check(CLI::IsMember({"hexplane", "fourier"}));
  trn->add_flag("--color-flow", tf.color_flow, "Integrate colors with an extra velocity head");

  auto* ren = app.add_subcommand("render", "Render a view at a normalized time");
  ren->add_option("--checkpoint", checkpoint)->required();
  ren->add_option("--dataset", dataset_dir, "Dataset providing the cameras")->required();
  ren->add_option("--camera", camera)->required();
  ren->add_option("--t", t, "Normalized time in [0, 1]")->required();
  ren->add_option("--out", out, "Output PNG")->required();
  ren->add_option("--config", config_path, "Run configuration JSON (integration options)");

  auto* evl = app.add_subcommand("eval", "Evaluate a trained model on held-out cameras");
  evl->add_option("--checkpoint", checkpoint)->required();
  evl->add_option("--dataset", dataset_dir)->required();
  evl->add_option("--out", out, "Report path prefix (.tsv and .json are appended)")->required();
  evl->add_option("--config", config_path, "Run configuration JSON (integration options)");

  auto* trk = app.add_subcommand("track", "Export trajectories of sampled foreground Gaussians");
  trk->add_option("--checkpoint", checkpoint)->required();
  trk->add_option("--out", out, "Output JSON")->required();
  trk->add_option("--count", count, "Number of Gaussians to sample");
  trk->add_option("--times", times_spec, "Time grid: a count or a comma-separated list")->required();
  trk->add_option("--seed", seed, "Sampling seed");
  trk->add_option("--config", config_path, "Run configuration JSON (integration options)");

  auto* slc = app.add_subcommand("slice", "Stack one pixel column over time");
  slc->add_option("--checkpoint", checkpoint)->required();
  slc->add_option("--dataset", dataset_dir)->required();
  slc->add_option("--camera", camera)->required();
  slc->add_option("--column", column)->required();
  slc->add_option("--out", out, "Output PNG")->required();
  slc->add_option("--times", times_spec, "Time grid (defaults to the dataset timesteps)");
  slc->add_option("--config", config_path, "Run configuration JSON (integration options)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out);
    if (trn->parsed()) return cmd_train(tf);

    const auto options = load_config(config_path).integration;
    if (ren->parsed()) {
      check_t(t);
      const auto dataset = load_dataset(dataset_dir);
      write_png(out, render_at(train::load_model(checkpoint), dataset, camera, t, options));
      return 0;
    }
    if (evl->parsed()) {
      const auto dataset = load_dataset(dataset_dir);
      const auto model = train::load_model(checkpoint);
      metrics::ReportOptions ro;
      const fs::path gt_path = fs::path(dataset_dir) / "ground_truth.json";
      if (fs::exists(gt_path)) ro.gt_points = synth::load_ground_truth(gt_path).positions;
      const auto report =
          metrics::build_report([&](double tq) { return train::query_time(model, tq, options); }, dataset, ro);
      std::ofstream tsv(out + ".tsv");
      report.write_tsv(tsv);
      std::ofstream js(out + ".json");
      js << report.to_json() << '\n';
      report.write_tsv(std::cout);
      return 0;
    }
    if (trk->parsed()) {
      const auto model = train::load_model(checkpoint);
      const auto times = parse_times(times_spec, nullptr);
      auto fg = model.scene.foreground_indices();
      if (count < 0) throw ConfigError("--count must be >= 0");
      if (static_cast<std::size_t>(count) > fg.size()) {
        std::cerr << "warning: --count " << count << " exceeds the " << fg.size()
                  << " foreground Gaussians; using all of them\n";
        count = static_cast<int>(fg.size());
      }
      std::mt19937_64 rng(seed);
      std::shuffle(fg.begin(), fg.end(), rng);
      fg.resize(static_cast<std::size_t>(count));
      std::sort(fg.begin(), fg.end());
      nlohmann::json tracks = nlohmann::json::array();
      std::vector<GaussianSet> scenes;
      for (double tq : times) scenes.push_back(train::query_time(model, tq, options));
      for (auto i : fg) {
        nlohmann::json pos = nlohmann::json::array();
        for (const auto& s : scenes) pos.push_back({s.centers[3 * i], s.centers[3 * i + 1], s.centers[3 * i + 2]});
        tracks.push_back({{"gaussian", i}, {"positions", pos}});
      }
      std::ofstream f(out);
      f << nlohmann::json{{"times", times}, {"tracks", tracks}}.dump(1) << '\n';
      if (!f) throw DataError("cannot write " + out);
      return 0;
    }
    if (slc->parsed()) {
      const auto dataset = load_dataset(dataset_dir);
      const auto model = train::load_model(checkpoint);
      if (camera >= dataset.cameras.size()) throw ConfigError("camera index out of range");
      const auto& cam = dataset.cameras[camera];
      if (column < 0 || column >= cam.width) throw ConfigError("--column must be within the image width");
      const auto times = parse_times(times_spec, &dataset);
      Image slice(static_cast<int>(times.size()), cam.height);
      for (std::size_t k = 0; k < times.size(); ++k) {
        const Image img = render_at(model, dataset, camera, times[k], options);
        for (int r = 0; r < cam.height; ++r) {
          for (int ch = 0; ch < 3; ++ch) slice.at(r, static_cast<int>(k), ch) = img.at(r, column, ch);
        }
      }
      write_png(out, slice);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
