#include "growflow/diff/parameter_store.hpp"

#include "growflow/core/errors.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace growflow::diff {

std::size_t ParameterStore::add(std::string name, std::vector<std::size_t> shape, double fill) {
  if (contains(name)) throw ContractError("ParameterStore: duplicate segment '" + name + "'");
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  segments_.push_back(Segment{std::move(name), std::move(shape), values_.size(), n});
  values_.resize(values_.size() + n, fill);
  grads_.resize(values_.size(), 0.0);
  return segments_.size() - 1;
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
}

std::size_t ParameterStore::segment_index(std::string_view name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name == name) return i;
  }
  throw ContractError("ParameterStore: no segment named '" + std::string(name) + "'");
}

const Segment& ParameterStore::segment(std::string_view name) const { return segments_[segment_index(name)]; }

std::span<double> ParameterStore::values(std::string_view name) {
  const auto& s = segment(name);
  return std::span<double>(values_).subspan(s.offset, s.size);
}

std::span<const double> ParameterStore::values(std::string_view name) const {
  const auto& s = segment(name);
  return std::span<const double>(values_).subspan(s.offset, s.size);
}

std::span<double> ParameterStore::grads(std::string_view name) {
  const auto& s = segment(name);
  return std::span<double>(grads_).subspan(s.offset, s.size);
}

std::span<const double> ParameterStore::grads(std::string_view name) const {
  const auto& s = segment(name);
  return std::span<const double>(grads_).subspan(s.offset, s.size);
}

void ParameterStore::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

}  // namespace growflow::diff
