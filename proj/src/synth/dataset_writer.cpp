#include "growflow/core/errors.hpp"
#include "growflow/splat/render.hpp"
#include "growflow/synth/scene.hpp"

#include <json.hpp>

#include <fstream>

namespace growflow::synth {

namespace {

using json = nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("ground_truth.json: expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json box_json(const Box& b) { return json{{"min", vec_json(b.min)}, {"max", vec_json(b.max)}}; }
Box box_from(const json& j) { return Box{vec_from(j.at("min")), vec_from(j.at("max"))}; }

}  // namespace

TimedDataset render_dataset(const GeneratedScene& scene, const SceneSpec& spec) {
  const GroundTruth& gt = scene.truth;
  TimedDataset ds;
  ds.cameras = scene.cameras;
  ds.time_axis = scene.time_axis;
  ds.scene_bounds = gt.scene_bounds;
  ds.foreground_box = gt.foreground_box;
  ds.held_out_cameras = scene.held_out;
  ds.background = spec.background;
  ds.dilation = 0.0;

  splat::RenderSettings settings;
  settings.dilation = 0.0;
  settings.background = spec.background;
  splat::RenderSettings alpha_settings = settings;
  alpha_settings.background = Vec3::Zero();

  for (std::size_t k = 0; k < ds.time_axis.size(); ++k) {
    const GaussianSet g = gaussians_at(gt, k);
    // Foreground only, white on black: the rendered value is the accumulated alpha.
    GaussianSet fg;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.foreground_mask[i]) continue;
      fg.add(g.center(i), g.rotation(i), g.log_scale(i), g.opacity_logits[i], Vec3::Ones(), true);
    }
    for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
      ds.images.emplace(std::pair{k, c}, splat::render_brute_force(g, ds.cameras[c], settings));
      const Image alpha = splat::render_brute_force(fg, ds.cameras[c], alpha_settings);
      Mask m{alpha.width(), alpha.height(), std::vector<std::uint8_t>(alpha.pixel_count(), 0)};
      for (int r = 0; r < alpha.height(); ++r) {
        for (int col = 0; col < alpha.width(); ++col) {
          m.values[static_cast<std::size_t>(r) * alpha.width() + col] = alpha.at(r, col, 0) >= 0.5 ? 1 : 0;
        }
      }
      ds.masks.emplace(std::pair{k, c}, std::move(m));
    }
  }
  ds.validate();
  return ds;
}

void write_scene(const GeneratedScene& scene, const TimedDataset& dataset, const std::filesystem::path& dir) {
  save_dataset(dataset, dir);
  save_ground_truth(scene.truth, dir / "ground_truth.json");
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  json positions = json::array(), radii = json::array(), colors = json::array();
  for (const auto& step : gt.positions) {
    json row = json::array();
    for (const auto& p : step) row.push_back(vec_json(p));
    positions.push_back(row);
  }
  for (const auto& step : gt.radii) radii.push_back(step);
  for (const auto& c : gt.colors) colors.push_back(vec_json(c));
  const auto& b = gt.backdrop;
  json doc{{"times", gt.times},
           {"positions", positions},
           {"radii", radii},
           {"colors", colors},
           {"birth", gt.birth},
           {"foreground_box", box_json(gt.foreground_box)},
           {"scene_bounds", box_json(gt.scene_bounds)},
           {"backdrop",
            {{"centers", b.centers},
             {"rotations", b.rotations},
             {"log_scales", b.log_scales},
             {"opacity_logits", b.opacity_logits},
             {"colors", b.colors}}}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  GroundTruth gt;
  try {
    const json doc = json::parse(in);
    gt.times = doc.at("times").get<std::vector<double>>();
    for (const auto& step : doc.at("positions")) {
      std::vector<Vec3> row;
      for (const auto& p : step) row.push_back(vec_from(p));
      gt.positions.push_back(std::move(row));
    }
    gt.radii = doc.at("radii").get<std::vector<std::vector<double>>>();
    for (const auto& c : doc.at("colors")) gt.colors.push_back(vec_from(c));
    gt.birth = doc.at("birth").get<std::vector<double>>();
    gt.foreground_box = box_from(doc.at("foreground_box"));
    gt.scene_bounds = box_from(doc.at("scene_bounds"));
    const auto& b = doc.at("backdrop");
    gt.backdrop.centers = b.at("centers").get<std::vector<double>>();
    gt.backdrop.rotations = b.at("rotations").get<std::vector<double>>();
    gt.backdrop.log_scales = b.at("log_scales").get<std::vector<double>>();
    gt.backdrop.opacity_logits = b.at("opacity_logits").get<std::vector<double>>();
    gt.backdrop.colors = b.at("colors").get<std::vector<double>>();
    gt.backdrop.foreground_mask.assign(gt.backdrop.opacity_logits.size(), 0);
    gt.backdrop.validate();
  } catch (const json::exception& e) {
    throw DataError("malformed ground_truth.json: " + std::string(e.what()));
  } catch (const ContractError& e) {
    throw DataError("malformed ground_truth.json: " + std::string(e.what()));
  }
  const std::size_t n = gt.colors.size();
  if (gt.positions.size() != gt.times.size() || gt.radii.size() != gt.times.size() || gt.birth.size() != n) {
    throw DataError("ground_truth.json: inconsistent array lengths");
  }
  for (std::size_t k = 0; k < gt.times.size(); ++k) {
    if (gt.positions[k].size() != n || gt.radii[k].size() != n) {
      throw DataError("ground_truth.json: inconsistent point counts");
    }
  }
  return gt;
}

}  // namespace growflow::synth
