#include "growflow/train/adam.hpp"

#include "growflow/core/errors.hpp"

#include <cmath>

namespace growflow::train {

Adam::Adam(std::size_t size, AdamOptions options) : options_(options) { reset(size); }

void Adam::reset(std::size_t size) {
  m_.assign(size, 0.0);
  v_.assign(size, 0.0);
  steps_ = 0;
}

void Adam::step(diff::ParameterStore& store, const RateFn& rate) {
  if (store.size() != m_.size()) throw ContractError("Adam: store size changed; call reset()");
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  auto values = store.values();
  auto grads = store.grads();
  for (const auto& seg : store.segments()) {
    const double lr = rate(seg);
    for (std::size_t j = seg.offset; j < seg.offset + seg.size; ++j) {
      const double g = grads[j];
      m_[j] = b1 * m_[j] + (1.0 - b1) * g;
      v_[j] = b2 * v_[j] + (1.0 - b2) * g * g;
      values[j] -= lr * (m_[j] / c1) / (std::sqrt(v_[j] / c2) + options_.eps);
    }
  }
}

double decayed_rate(double lr, double final_ratio, int iter, int total) {
  if (total <= 1) return lr;
  return lr * std::pow(final_ratio, static_cast<double>(iter) / (total - 1));
}

}  // namespace growflow::train
