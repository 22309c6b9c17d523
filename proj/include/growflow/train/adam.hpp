#pragma once

#include "growflow/diff/parameter_store.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace growflow::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

// Learning rate for one segment of the store.
using RateFn = std::function<double(const diff::Segment&)>;

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t size, AdamOptions options = {});

  // Bias-corrected update of every parameter from the store's gradients.
  void step(diff::ParameterStore& store, const RateFn& rate);

  std::size_t steps() const { return steps_; }
  void reset(std::size_t size);

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

// lr * final_ratio^(iter / (total - 1)): exponential decay from lr to
// final_ratio * lr over a stage of `total` iterations.
double decayed_rate(double lr, double final_ratio, int iter, int total);

}  // namespace growflow::train
