#include "growflow/field/velocity_field.hpp"

#include "growflow/core/errors.hpp"

#include <cmath>
#include <random>

namespace growflow::field {

namespace {

constexpr std::array<const char*, 4> kHeads = {"mu", "q", "s", "c"};
constexpr std::array<int, 4> kHeadDims = {3, 4, 3, 3};

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

void FieldConfig::validate() const {
  if (spatial_resolution < 2 || temporal_resolution < 2) throw ConfigError("field: resolutions must be >= 2");
  if (upsample_factor < 1) throw ConfigError("field: upsample_factor must be >= 1");
  if (levels < 1 || features < 1 || hidden < 1) throw ConfigError("field: levels, features and hidden must be >= 1");
  if (fourier_bands < 1) throw ConfigError("field: fourier_bands must be >= 1");
  for (int d = 0; d < 3; ++d) {
    if (!(bounds.max[d] > bounds.min[d])) throw ConfigError("field: bounds must have positive extent");
  }
}

int FieldConfig::spatial_res(int level) const {
  int r = spatial_resolution;
  for (int l = 0; l < level; ++l) r *= upsample_factor;
  return r;
}

int FieldConfig::temporal_res(int level) const {
  int r = temporal_resolution;
  for (int l = 0; l < level; ++l) r *= upsample_factor;
  return r;
}

std::string plane_segment(int level, int plane) {
  return "hex.L" + std::to_string(level) + "." + kPlaneNames.at(static_cast<std::size_t>(plane));
}

VelocityField::VelocityField(FieldConfig config) : config_(std::move(config)) {
  config_.validate();
  const int nf = config_.features;
  const int feat = config_.feature_dim();
  if (config_.encoder == EncoderKind::HexPlane) {
    for (int l = 0; l < config_.levels; ++l) {
      for (int p = 0; p < 6; ++p) {
        const auto [a, b] = kPlaneAxes[p];
        const auto res = [&](int axis) {
          return static_cast<std::size_t>(axis < 3 ? config_.spatial_res(l) : config_.temporal_res(l));
        };
        params_.add(plane_segment(l, p), {res(a), res(b), static_cast<std::size_t>(nf)}, 1.0);
      }
    }
  } else {
    add_mlp("enc", 8 * config_.fourier_bands + 4, config_.hidden, feat);
  }
  add_mlp("fusion", feat, config_.hidden, config_.hidden);
  for (int h = 0; h < (config_.color_flow ? 4 : 3); ++h) {
    add_mlp(std::string("head.") + kHeads[h], config_.hidden, config_.hidden, kHeadDims[h]);
  }
  reinitialize();
}

void VelocityField::add_mlp(const std::string& name, int in, int hidden, int out) {
  const auto u = [](int v) { return static_cast<std::size_t>(v); };
  params_.add(name + ".fc1.w", {u(in), u(hidden)});
  params_.add(name + ".fc1.b", {u(hidden)});
  params_.add(name + ".fc2.w", {u(hidden), u(out)});
  params_.add(name + ".fc2.b", {u(out)});
}

ParamGroup VelocityField::group(const diff::Segment& segment) const {
  return starts_with(segment.name, "hex.") || starts_with(segment.name, "enc.") ? ParamGroup::Grid : ParamGroup::Mlp;
}

void VelocityField::reinitialize() {
  std::mt19937_64 rng(config_.seed);
  for (const auto& seg : params_.segments()) {
    auto v = params_.values(seg.name);
    if (starts_with(seg.name, "hex.")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (starts_with(seg.name, "head.") && seg.name.find(".fc2.") != std::string::npos) {
      std::fill(v.begin(), v.end(), 0.0);
    } else if (seg.name.ends_with(".b")) {
      std::fill(v.begin(), v.end(), 0.0);
    } else {
      const double bound = starts_with(seg.name, "enc.") ? 1e-2 : 1.0 / std::sqrt(static_cast<double>(seg.shape[0]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& x : v) x = dist(rng);
    }
  }
  params_.zero_grad();
}

BoundParams VelocityField::bind(diff::Tape& tape) {
  BoundParams out;
  for (const auto& seg : params_.segments()) out.emplace(seg.name, tape.param(params_, seg.name));
  return out;
}

diff::Var VelocityField::encode(diff::Tape& tape, const BoundParams& bound, diff::Var centers, std::size_t count,
                                double t) const {
  const auto p = [&](const std::string& name) {
    auto it = bound.find(name);
    if (it == bound.end()) throw ContractError("VelocityField: parameter '" + name + "' not bound");
    return it->second;
  };
  if (config_.encoder == EncoderKind::HexPlane) {
    std::vector<diff::Var> planes;
    for (int l = 0; l < config_.levels; ++l) {
      for (int k = 0; k < 6; ++k) planes.push_back(p(plane_segment(l, k)));
    }
    return hex_interp_op(tape, planes, config_, centers, count, t);
  }
  auto g = fourier_encode_op(tape, config_, centers, count, t);
  auto h = tape.relu(tape.linear(g, count, p("enc.fc1.w"), p("enc.fc1.b")));
  return tape.linear(h, count, p("enc.fc2.w"), p("enc.fc2.b"));
}

diff::Var VelocityField::forward(diff::Tape& tape, const BoundParams& bound, diff::Var centers, std::size_t count,
                                 double t) const {
  const auto p = [&](const std::string& name) {
    auto it = bound.find(name);
    if (it == bound.end()) throw ContractError("VelocityField: parameter '" + name + "' not bound");
    return it->second;
  };
  const auto mlp = [&](const std::string& name, diff::Var x) {
    auto h = tape.relu(tape.linear(x, count, p(name + ".fc1.w"), p(name + ".fc1.b")));
    return tape.linear(h, count, p(name + ".fc2.w"), p(name + ".fc2.b"));
  };
  auto z = mlp("fusion", encode(tape, bound, centers, count, t));
  std::vector<diff::Var> heads;
  for (int h = 0; h < (config_.color_flow ? 4 : 3); ++h) heads.push_back(mlp(std::string("head.") + kHeads[h], z));
  return tape.concat(heads);
}

std::vector<double> VelocityField::eval_flat(std::span<const double> centers, double t) const {
  if (centers.size() % 3 != 0) throw ContractError("VelocityField::eval_flat: centers must be n x 3");
  const std::size_t n = centers.size() / 3;
  if (n == 0) return {};
  diff::Tape tape;
  BoundParams bound;
  for (const auto& seg : params_.segments()) bound.emplace(seg.name, tape.view(params_.values(seg.name)));
  auto out = forward(tape, bound, tape.view(centers), n, t);
  auto v = tape.value(out);
  return {v.begin(), v.end()};
}

std::vector<Velocity> VelocityField::eval(std::span<const double> centers, double t) const {
  const auto flat = eval_flat(centers, t);
  const std::size_t n = centers.size() / 3;
  std::vector<Velocity> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) out[i].d_center[k] = flat[3 * i + k];
    for (int k = 0; k < 4; ++k) out[i].d_quat[k] = flat[3 * n + 4 * i + k];
    for (int k = 0; k < 3; ++k) out[i].d_log_scale[k] = flat[7 * n + 3 * i + k];
    if (config_.color_flow) {
      Vec3 c;
      for (int k = 0; k < 3; ++k) c[k] = flat[10 * n + 3 * i + k];
      out[i].d_color = c;
    }
  }
  return out;
}

void VelocityField::save(CheckpointSections& sections, const std::string& prefix) const {
  const auto& c = config_;
  sections[prefix + "config"] = {static_cast<double>(c.spatial_resolution),
                                 static_cast<double>(c.temporal_resolution),
                                 static_cast<double>(c.upsample_factor),
                                 static_cast<double>(c.levels),
                                 static_cast<double>(c.features),
                                 static_cast<double>(c.hidden),
                                 static_cast<double>(c.fourier_bands),
                                 c.encoder == EncoderKind::HexPlane ? 0.0 : 1.0,
                                 c.color_flow ? 1.0 : 0.0,
                                 c.bounds.min.x(),
                                 c.bounds.min.y(),
                                 c.bounds.min.z(),
                                 c.bounds.max.x(),
                                 c.bounds.max.y(),
                                 c.bounds.max.z(),
                                 static_cast<double>(c.seed)};
  for (const auto& seg : params_.segments()) {
    auto v = params_.values(seg.name);
    sections[prefix + seg.name] = {v.begin(), v.end()};
  }
}

VelocityField VelocityField::load(const CheckpointSections& sections, const std::string& prefix) {
  const auto& cfg = require_section(sections, prefix + "config");
  if (cfg.size() != 16) throw DataError("checkpoint: malformed section '" + prefix + "config'");
  FieldConfig c;
  c.spatial_resolution = static_cast<int>(cfg[0]);
  c.temporal_resolution = static_cast<int>(cfg[1]);
  c.upsample_factor = static_cast<int>(cfg[2]);
  c.levels = static_cast<int>(cfg[3]);
  c.features = static_cast<int>(cfg[4]);
  c.hidden = static_cast<int>(cfg[5]);
  c.fourier_bands = static_cast<int>(cfg[6]);
  c.encoder = cfg[7] == 0.0 ? EncoderKind::HexPlane : EncoderKind::FourierMlp;
  c.color_flow = cfg[8] != 0.0;
  c.bounds.min = Vec3(cfg[9], cfg[10], cfg[11]);
  c.bounds.max = Vec3(cfg[12], cfg[13], cfg[14]);
  c.seed = static_cast<std::uint64_t>(cfg[15]);
  VelocityField field(c);
  for (const auto& seg : field.params_.segments()) {
    const auto& v = require_section(sections, prefix + seg.name);
    if (v.size() != seg.size) throw DataError("checkpoint: section '" + prefix + seg.name + "' has wrong size");
    std::copy(v.begin(), v.end(), field.params_.values(seg.name).begin());
  }
  return field;
}

}  // namespace growflow::field
