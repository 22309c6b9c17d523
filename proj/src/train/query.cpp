#include "growflow/core/errors.hpp"
#include "growflow/train/model.hpp"

#include <cmath>
#include <string>

namespace growflow::train {

ode::IntegrationOptions query_options() {
  ode::IntegrationOptions o;
  o.method = ode::Method::Rk45Adaptive;
  return o;
}

GaussianSet query_time(const TrainedModel& model, double t, const ode::IntegrationOptions& options) {
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("query_time: t must be in [0, 1], got " + std::to_string(t));
  GaussianSet out = model.scene;
  if (!model.cache || model.cache->snapshots.empty()) {
    if (t == 1.0) return out;
    throw ContractError("query_time: model has no boundary cache");
  }
  const auto& c = *model.cache;
  // times are descending; find k with times[k] >= t >= times[k + 1].
  std::size_t k = 0;
  while (k + 1 < c.times.size() && c.times[k + 1] > t) ++k;
  std::size_t start = k;
  if (k + 1 < c.times.size() && k + 1 < c.snapshots.size() && std::abs(t - c.times[k + 1]) < std::abs(c.times[k] - t)) {
    start = k + 1;
  }
  if (start >= c.snapshots.size()) start = 0;

  const auto& s0 = c.snapshots[start];
  if (c.times[start] == t) {
    s0.scatter(out);
    return out;
  }
  if (!model.field) throw ContractError("query_time: model has no trained field");
  ode::GeomState s = ode::integrate_state(*model.field, s0, c.times[start], t, options);
  s.scatter(out);
  return out;
}

}  // namespace growflow::train
