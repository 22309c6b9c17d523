#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace growflow::diff {

struct Segment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat storage of named parameter segments with a gradient buffer of the same
// layout. Spans handed out stay valid until the next add().
class ParameterStore {
 public:
  // Returns the index of the new segment. Names must be unique.
  std::size_t add(std::string name, std::vector<std::size_t> shape, double fill = 0.0);

  bool contains(std::string_view name) const;
  std::size_t segment_index(std::string_view name) const;
  const Segment& segment(std::string_view name) const;
  const std::vector<Segment>& segments() const { return segments_; }

  std::span<double> values(std::string_view name);
  std::span<const double> values(std::string_view name) const;
  std::span<double> grads(std::string_view name);
  std::span<const double> grads(std::string_view name) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }

  std::size_t size() const { return values_.size(); }
  void zero_grad();

 private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

}  // namespace growflow::diff
