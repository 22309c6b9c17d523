#include "growflow/core/checkpoint.hpp"

#include "growflow/core/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace growflow {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

std::uint64_t get_u64(std::ifstream& in, const std::filesystem::path& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw DataError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointSections& sections) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_u64(out, sections.size());
  for (const auto& [name, values] : sections) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, values.size());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 8));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

CheckpointSections read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 16> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw DataError("not a growflow checkpoint: " + path.string());
  }
  const auto count = get_u64(in, path);
  CheckpointSections sections;
  for (std::uint64_t s = 0; s < count; ++s) {
    const auto name_len = get_u64(in, path);
    if (name_len > 4096) throw DataError("corrupt checkpoint section name in " + path.string());
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) throw DataError("truncated checkpoint");
    const auto n = get_u64(in, path);
    std::vector<double> values(n);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * 8))) {
      throw DataError("truncated checkpoint section '" + name + "' in " + path.string());
    }
    sections.emplace(std::move(name), std::move(values));
  }
  return sections;
}

const std::vector<double>& require_section(const CheckpointSections& sections, const std::string& name) {
  auto it = sections.find(name);
  if (it == sections.end()) throw DataError("checkpoint is missing section '" + name + "'");
  return it->second;
}

void store_gaussians(CheckpointSections& sections, const GaussianSet& g, const std::string& prefix) {
  g.validate();
  sections[prefix + "centers"] = g.centers;
  sections[prefix + "rotations"] = g.rotations;
  sections[prefix + "log_scales"] = g.log_scales;
  sections[prefix + "opacity_logits"] = g.opacity_logits;
  sections[prefix + "colors"] = g.colors;
  std::vector<double> fg(g.foreground_mask.begin(), g.foreground_mask.end());
  sections[prefix + "foreground_mask"] = std::move(fg);
}

GaussianSet load_gaussians(const CheckpointSections& sections, const std::string& prefix) {
  GaussianSet g;
  g.centers = require_section(sections, prefix + "centers");
  g.rotations = require_section(sections, prefix + "rotations");
  g.log_scales = require_section(sections, prefix + "log_scales");
  g.opacity_logits = require_section(sections, prefix + "opacity_logits");
  g.colors = require_section(sections, prefix + "colors");
  for (double v : require_section(sections, prefix + "foreground_mask")) {
    g.foreground_mask.push_back(v != 0.0 ? 1 : 0);
  }
  try {
    g.validate();
  } catch (const ContractError& e) {
    throw DataError(std::string("checkpoint Gaussian sections inconsistent: ") + e.what());
  }
  return g;
}

}  // namespace growflow
