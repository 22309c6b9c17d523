#pragma once

#include "growflow/diff/parameter_store.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace growflow::diff {

// Evaluates a scalar loss at the store's current values and accumulates its
// analytic gradient into store.grads(). Called with gradients zeroed.
using ScalarObjective = std::function<double(ParameterStore&)>;

struct FdOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so entries whose true gradient
  // is zero compare on absolute error.
  double abs_floor = 1e-8;
  // Flat indices to check; empty checks every parameter.
  std::vector<std::size_t> indices;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_segment;
  std::size_t worst_index = 0;  // within worst_segment
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

// Central-difference check of the analytic gradient. Throws ContractError
// ("check invalid") if two evaluations at the same point disagree.
FdReport finite_difference_check(const ScalarObjective& f, ParameterStore& store, const FdOptions& options = {});

}  // namespace growflow::diff
