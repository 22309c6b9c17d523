#include "growflow/cli/run_config.hpp"

#include "growflow/core/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace growflow::cli {

namespace {

using json = nlohmann::json;
using Handler = std::function<void(const json&, const std::string& path)>;
using Fields = std::map<std::string, Handler>;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void read_object(const json& j, const std::string& path, const Fields& fields) {
  if (!j.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("config: unknown key '" + join(path, key) + "'");
    it->second(value, join(path, key));
  }
}

template <typename T>
Handler field(T& dst) {
  return [&dst](const json& j, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (j.get<long long>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!j.is_number()) throw ConfigError("");
      } else {
        if (!j.is_string()) throw ConfigError("");
      }
      dst = j.get<T>();
    } catch (const Error&) {
      throw ConfigError("config: '" + path + "' has the wrong type");
    }
  };
}

Handler vec3_field(Vec3& dst) {
  return [&dst](const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
      throw ConfigError("config: '" + path + "' must be an array of 3 numbers");
    }
    dst = Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  };
}

template <typename E>
Handler enum_field(E& dst, std::map<std::string, E> names) {
  return [&dst, names = std::move(names)](const json& j, const std::string& path) {
    if (j.is_string()) {
      const auto it = names.find(j.get<std::string>());
      if (it != names.end()) {
        dst = it->second;
        return;
      }
    }
    std::string allowed;
    for (const auto& [k, v] : names) allowed += (allowed.empty() ? "" : ", ") + k;
    throw ConfigError("config: '" + path + "' must be one of: " + allowed);
  };
}

Handler object(Fields fields) {
  return [fields = std::move(fields)](const json& j, const std::string& path) { read_object(j, path, fields); };
}

const std::map<std::string, synth::GrowthCurve> kCurves = {{"linear", synth::GrowthCurve::Linear},
                                                            {"smoothstep", synth::GrowthCurve::Smoothstep}};
const std::map<std::string, field::EncoderKind> kEncoders = {{"hexplane", field::EncoderKind::HexPlane},
                                                              {"fourier", field::EncoderKind::FourierMlp}};
const std::map<std::string, ode::Method> kMethods = {{"rk4_fixed", ode::Method::Rk4Fixed},
                                                      {"rk45_adaptive", ode::Method::Rk45Adaptive}};

template <typename E>
std::string name_of(const std::map<std::string, E>& names, E value) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return {};
}

Fields root_fields(RunConfig& c) {
  auto& s = c.scene;
  auto& t = c.train;
  auto& f = c.train.field;
  auto& d = c.train.densify;
  auto& r = c.train.lr_static;
  auto& i = c.integration;
  return {
      {"scene", object({{"n_stems", field(s.n_stems)},
                        {"n_branch_events", field(s.n_branch_events)},
                        {"n_gaussians", field(s.n_gaussians)},
                        {"n_timesteps", field(s.n_timesteps)},
                        {"camera_count", field(s.camera_count)},
                        {"image_size", field(s.image_size)},
                        {"growth_curve", enum_field(s.growth_curve, kCurves)},
                        {"seed", field(s.seed)},
                        {"background", vec3_field(s.background)},
                        {"supervised_stride", field(s.supervised_stride)},
                        {"held_out_every", field(s.held_out_every)}})},
      {"train",
       object({{"n_static", field(t.n_static)},
               {"n_boundary", field(t.n_boundary)},
               {"n_global", field(t.n_global)},
               {"lr_grid", field(t.lr_grid)},
               {"lr_mlp", field(t.lr_mlp)},
               {"lr_final_ratio", field(t.lr_final_ratio)},
               {"lr_static", object({{"position", field(r.position)},
                                     {"rotation", field(r.rotation)},
                                     {"log_scale", field(r.log_scale)},
                                     {"opacity", field(r.opacity)},
                                     {"color", field(r.color)}})},
               {"view_batch", field(t.view_batch)},
               {"ssim_lambda", field(t.ssim_lambda)},
               {"seed", field(t.seed)},
               {"densify", object({{"enabled", field(d.enabled)},
                                   {"interval", field(d.interval)},
                                   {"stop_fraction_percent", field(d.stop_fraction_percent)},
                                   {"grad_threshold", field(d.grad_threshold)},
                                   {"percent_dense", field(d.percent_dense)},
                                   {"prune_opacity", field(d.prune_opacity)}})},
               {"skip_boundary", field(t.skip_boundary)},
               {"warm_start", field(t.warm_start)},
               {"substeps", field(t.substeps)},
               {"init_count", field(t.init_count)},
               {"init_jitter", field(t.init_jitter)},
               {"checkpoint_every", field(t.checkpoint_every)},
               {"field", object({{"spatial_resolution", field(f.spatial_resolution)},
                                 {"temporal_resolution", field(f.temporal_resolution)},
                                 {"upsample_factor", field(f.upsample_factor)},
                                 {"levels", field(f.levels)},
                                 {"features", field(f.features)},
                                 {"hidden", field(f.hidden)},
                                 {"fourier_bands", field(f.fourier_bands)},
                                 {"encoder", enum_field(f.encoder, kEncoders)},
                                 {"color_flow", field(f.color_flow)},
                                 {"seed", field(f.seed)}})}})},
      {"integration", object({{"method", enum_field(i.method, kMethods)},
                              {"substeps", field(i.substeps)},
                              {"rtol", field(i.rtol)},
                              {"atol", field(i.atol)},
                              {"max_steps", field(i.max_steps)},
                              {"renormalize_quats", field(i.renormalize_quats)}})},
      {"paths", object({{"dataset", field(c.paths.dataset)},
                        {"output", field(c.paths.output)},
                        {"checkpoint", field(c.paths.checkpoint)}})},
  };
}

}  // namespace

RunConfig::RunConfig() { integration.method = ode::Method::Rk45Adaptive; }

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  read_object(j, "", root_fields(c));
  c.scene.validate();
  c.train.validate();
  c.integration.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  const auto& s = c.scene;
  const auto& t = c.train;
  const auto& f = t.field;
  const auto& d = t.densify;
  const auto& r = t.lr_static;
  const auto& i = c.integration;
  const auto v3 = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json j{{"scene",
          {{"n_stems", s.n_stems},
           {"n_branch_events", s.n_branch_events},
           {"n_gaussians", s.n_gaussians},
           {"n_timesteps", s.n_timesteps},
           {"camera_count", s.camera_count},
           {"image_size", s.image_size},
           {"growth_curve", name_of(kCurves, s.growth_curve)},
           {"seed", s.seed},
           {"background", v3(s.background)},
           {"supervised_stride", s.supervised_stride},
           {"held_out_every", s.held_out_every}}},
         {"train",
          {{"n_static", t.n_static},
           {"n_boundary", t.n_boundary},
           {"n_global", t.n_global},
           {"lr_grid", t.lr_grid},
           {"lr_mlp", t.lr_mlp},
           {"lr_final_ratio", t.lr_final_ratio},
           {"lr_static",
            {{"position", r.position}, {"rotation", r.rotation}, {"log_scale", r.log_scale}, {"opacity", r.opacity},
             {"color", r.color}}},
           {"view_batch", t.view_batch},
           {"ssim_lambda", t.ssim_lambda},
           {"seed", t.seed},
           {"densify",
            {{"enabled", d.enabled},
             {"interval", d.interval},
             {"stop_fraction_percent", d.stop_fraction_percent},
             {"grad_threshold", d.grad_threshold},
             {"percent_dense", d.percent_dense},
             {"prune_opacity", d.prune_opacity}}},
           {"skip_boundary", t.skip_boundary},
           {"warm_start", t.warm_start},
           {"substeps", t.substeps},
           {"init_count", t.init_count},
           {"init_jitter", t.init_jitter},
           {"checkpoint_every", t.checkpoint_every},
           {"field",
            {{"spatial_resolution", f.spatial_resolution},
             {"temporal_resolution", f.temporal_resolution},
             {"upsample_factor", f.upsample_factor},
             {"levels", f.levels},
             {"features", f.features},
             {"hidden", f.hidden},
             {"fourier_bands", f.fourier_bands},
             {"encoder", name_of(kEncoders, f.encoder)},
             {"color_flow", f.color_flow},
             {"seed", f.seed}}}}},
         {"integration",
          {{"method", name_of(kMethods, i.method)},
           {"substeps", i.substeps},
           {"rtol", i.rtol},
           {"atol", i.atol},
           {"max_steps", i.max_steps},
           {"renormalize_quats", i.renormalize_quats}}},
         {"paths", {{"dataset", c.paths.dataset}, {"output", c.paths.output}, {"checkpoint", c.paths.checkpoint}}}};
  return j.dump(2);
}

}  // namespace growflow::cli
