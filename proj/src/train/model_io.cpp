#include "growflow/core/errors.hpp"
#include "growflow/train/model.hpp"

#include <string>

namespace growflow::train {

CheckpointSections to_sections(const TrainedModel& model) {
  CheckpointSections s;
  store_gaussians(s, model.scene);
  if (model.cache) {
    const auto& c = *model.cache;
    const bool with_color = !c.snapshots.empty() && c.snapshots.front().with_color;
    s["cache.flags"] = {c.skip_boundary ? 1.0 : 0.0, with_color ? 1.0 : 0.0,
                        static_cast<double>(c.snapshots.size())};
    s["cache.times"] = c.times;
    if (!c.snapshots.empty()) {
      const auto& idx = c.snapshots.front().indices;
      s["cache.indices"] = std::vector<double>(idx.begin(), idx.end());
    }
    for (std::size_t k = 0; k < c.snapshots.size(); ++k) s["cache.snapshot." + std::to_string(k)] = c.snapshots[k].values;
  }
  if (model.field) model.field->save(s, "field.");
  return s;
}

TrainedModel from_sections(const CheckpointSections& sections) {
  TrainedModel m;
  m.scene = load_gaussians(sections);
  if (sections.contains("cache.flags")) {
    const auto& flags = sections.at("cache.flags");
    if (flags.size() != 3) throw DataError("checkpoint: malformed section 'cache.flags'");
    BoundaryCache c;
    c.skip_boundary = flags[0] != 0.0;
    const bool with_color = flags[1] != 0.0;
    const auto count = static_cast<std::size_t>(flags[2]);
    c.times = require_section(sections, "cache.times");
    std::vector<std::size_t> indices;
    if (count > 0) {
      for (double v : require_section(sections, "cache.indices")) indices.push_back(static_cast<std::size_t>(v));
    }
    for (std::size_t k = 0; k < count; ++k) {
      ode::GeomState s;
      s.indices = indices;
      s.with_color = with_color;
      s.values = require_section(sections, "cache.snapshot." + std::to_string(k));
      if (s.values.size() != s.width() * s.count()) throw DataError("checkpoint: cache snapshot has wrong size");
      c.snapshots.push_back(std::move(s));
    }
    m.cache = std::move(c);
  }
  if (sections.contains("field.config")) m.field = field::VelocityField::load(sections, "field.");
  return m;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_checkpoint(path, to_sections(model));
}

TrainedModel load_model(const std::filesystem::path& path) { return from_sections(read_checkpoint(path)); }

}  // namespace growflow::train
