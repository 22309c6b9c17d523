#include "growflow/core/dataset.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/core/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <string>

namespace growflow {

using nlohmann::json;

const Image& TimedDataset::image(std::size_t timestep, std::size_t camera) const {
  auto it = images.find({timestep, camera});
  if (it == images.end()) {
    throw DataError("dataset has no image for timestep " + std::to_string(timestep) + ", camera " +
                    std::to_string(camera));
  }
  return it->second;
}

const Mask* TimedDataset::mask(std::size_t timestep, std::size_t camera) const {
  auto it = masks.find({timestep, camera});
  return it == masks.end() ? nullptr : &it->second;
}

bool TimedDataset::has_image(std::size_t timestep, std::size_t camera) const {
  return images.contains({timestep, camera});
}

bool TimedDataset::is_held_out(std::size_t camera) const {
  return std::find(held_out_cameras.begin(), held_out_cameras.end(), camera) != held_out_cameras.end();
}

std::vector<std::size_t> TimedDataset::training_cameras() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    if (!is_held_out(c)) out.push_back(c);
  }
  return out;
}

void TimedDataset::validate() const {
  time_axis.validate();
  for (const auto& cam : cameras) cam.validate();
  for (const auto& [key, img] : images) {
    const auto [t, c] = key;
    if (t >= time_axis.size() || c >= cameras.size()) throw DataError("dataset image index out of range");
    if (img.width() != cameras[c].width || img.height() != cameras[c].height) {
      throw DataError("image (t=" + std::to_string(t) + ", cam=" + std::to_string(c) +
                      ") does not match its camera dimensions");
    }
  }
  for (const auto& [key, m] : masks) {
    const auto c = key.second;
    if (c >= cameras.size() || m.width != cameras[c].width || m.height != cameras[c].height) {
      throw DataError("mask does not match its camera dimensions");
    }
  }
  if (!scene_bounds.contains(foreground_box)) throw DataError("foreground box is not inside the scene bounds");
  for (auto c : held_out_cameras) {
    if (c >= cameras.size()) throw DataError("held-out camera index out of range");
  }
}

namespace {

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json box_json(const Box& b) { return json{{"min", vec_json(b.min)}, {"max", vec_json(b.max)}}; }
Box box_from(const json& j) { return Box{vec_from(j.at("min")), vec_from(j.at("max"))}; }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path image_path(const std::filesystem::path& root, const std::string& kind, int raw_t,
                                 std::size_t cam) {
  return root / kind / ("t" + std::to_string(raw_t)) / ("cam" + std::to_string(cam) + ".png");
}

}  // namespace

TimedDataset load_dataset(const std::filesystem::path& dir) {
  TimedDataset ds;
  try {
    const json cams = read_json(dir / "cameras.json");
    for (const auto& c : cams.at("cameras")) {
      Camera cam;
      const auto& r = c.at("rotation_world_to_cam");
      if (r.size() != 9) throw DataError("cameras.json: rotation must have 9 row-major entries");
      for (int i = 0; i < 9; ++i) cam.rotation_world_to_cam(i / 3, i % 3) = r[i].get<double>();
      cam.translation = vec_from(c.at("translation"));
      cam.fx = c.at("fx").get<double>();
      cam.fy = c.at("fy").get<double>();
      cam.cx = c.at("cx").get<double>();
      cam.cy = c.at("cy").get<double>();
      cam.width = c.at("width").get<int>();
      cam.height = c.at("height").get<int>();
      ds.cameras.push_back(cam);
    }
    ds.held_out_cameras = cams.value("held_out", std::vector<std::size_t>{});

    const json times = read_json(dir / "times.json");
    auto raw = times.at("raw_timesteps").get<std::vector<int>>();
    auto supervised = times.at("supervised").get<std::vector<std::size_t>>();
    const auto t_index = times.at("T_index").get<std::size_t>();
    ds.time_axis = TimeAxis::from_raw(std::move(raw), std::move(supervised));
    if (t_index != ds.time_axis.final_index) throw DataError("times.json: T_index must be the last timestep");
    ds.scene_bounds = box_from(times.at("scene_bounds"));
    ds.foreground_box = box_from(times.at("foreground_box"));
    if (times.contains("background")) ds.background = vec_from(times.at("background"));
    ds.dilation = times.value("dilation", 0.3);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset metadata: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(std::string("invalid dataset metadata: ") + e.what());
  }

  for (std::size_t t = 0; t < ds.time_axis.size(); ++t) {
    const int raw_t = ds.time_axis.raw_timesteps[t];
    for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
      const auto img = image_path(dir, "images", raw_t, c);
      if (std::filesystem::exists(img)) ds.images.emplace(std::pair{t, c}, read_png(img));
      const auto msk = image_path(dir, "masks", raw_t, c);
      if (std::filesystem::exists(msk)) ds.masks.emplace(std::pair{t, c}, read_mask_png(msk));
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const TimedDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  json cams = json::array();
  for (const auto& cam : ds.cameras) {
    json r = json::array();
    for (int i = 0; i < 9; ++i) r.push_back(cam.rotation_world_to_cam(i / 3, i % 3));
    cams.push_back(json{{"rotation_world_to_cam", r},
                        {"translation", vec_json(cam.translation)},
                        {"fx", cam.fx},
                        {"fy", cam.fy},
                        {"cx", cam.cx},
                        {"cy", cam.cy},
                        {"width", cam.width},
                        {"height", cam.height}});
  }
  write_json(dir / "cameras.json", json{{"cameras", cams}, {"held_out", ds.held_out_cameras}});

  write_json(dir / "times.json", json{{"raw_timesteps", ds.time_axis.raw_timesteps},
                                      {"supervised", ds.time_axis.supervised},
                                      {"T_index", ds.time_axis.final_index},
                                      {"scene_bounds", box_json(ds.scene_bounds)},
                                      {"foreground_box", box_json(ds.foreground_box)},
                                      {"background", vec_json(ds.background)},
                                      {"dilation", ds.dilation}});

  for (const auto& [key, img] : ds.images) {
    const auto path = image_path(dir, "images", ds.time_axis.raw_timesteps[key.first], key.second);
    std::filesystem::create_directories(path.parent_path());
    write_png(path, img);
  }
  for (const auto& [key, m] : ds.masks) {
    const auto path = image_path(dir, "masks", ds.time_axis.raw_timesteps[key.first], key.second);
    std::filesystem::create_directories(path.parent_path());
    write_mask_png(path, m);
  }
}

}  // namespace growflow
