#pragma once

#include "growflow/core/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace growflow {

inline constexpr std::array<char, 16> kCheckpointMagic = {'G', 'R', 'O', 'W', 'F', 'L', 'O', 'W',
                                                         'C', 'K', 'P', 'T', '\0', '\0', '\0', '\1'};

// Named sections of little-endian 64-bit floats. On disk, after the magic:
//   u64 section_count
//   per section: u64 name_length, name bytes, u64 value_count, value_count x f64
// Sections are written in key order.
using CheckpointSections = std::map<std::string, std::vector<double>>;

void write_checkpoint(const std::filesystem::path& path, const CheckpointSections& sections);
CheckpointSections read_checkpoint(const std::filesystem::path& path);

// GaussianSet <-> sections prefixed with `prefix` ("gaussians." by default).
void store_gaussians(CheckpointSections& sections, const GaussianSet& gaussians,
                     const std::string& prefix = "gaussians.");
GaussianSet load_gaussians(const CheckpointSections& sections, const std::string& prefix = "gaussians.");

const std::vector<double>& require_section(const CheckpointSections& sections, const std::string& name);

}  // namespace growflow
