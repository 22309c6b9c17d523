#include "growflow/diff/fd_check.hpp"

#include "growflow/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace growflow::diff {

FdReport finite_difference_check(const ScalarObjective& f, ParameterStore& store, const FdOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("finite_difference_check: step must be positive");

  store.zero_grad();
  const double base = f(store);
  const std::vector<double> analytic(store.grads().begin(), store.grads().end());
  store.zero_grad();
  const double again = f(store);
  if (base != again) {
    throw ContractError("finite_difference_check: check invalid, objective is not deterministic (" +
                        std::to_string(base) + " vs " + std::to_string(again) + ")");
  }

  std::vector<std::size_t> indices = options.indices;
  if (indices.empty()) {
    indices.resize(store.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }

  FdReport report;
  auto values = store.values();
  for (auto idx : indices) {
    if (idx >= store.size()) throw ContractError("finite_difference_check: index out of range");
    const double saved = values[idx];
    values[idx] = saved + options.step;
    store.zero_grad();
    const double plus = f(store);
    values[idx] = saved - options.step;
    store.zero_grad();
    const double minus = f(store);
    values[idx] = saved;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        for (const auto& seg : store.segments()) {
          if (idx >= seg.offset && idx < seg.offset + seg.size) {
            report.worst_segment = seg.name;
            report.worst_index = idx - seg.offset;
          }
        }
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  store.zero_grad();
  std::copy(analytic.begin(), analytic.end(), store.grads().begin());
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace growflow::diff
