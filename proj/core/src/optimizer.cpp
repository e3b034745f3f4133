#include "polypnet/optimizer.hpp"

#include <cmath>

#include "polypnet/errors.hpp"

namespace polypnet {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ValueError("adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValueError("adam: beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValueError("adam: beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) throw ValueError("adam: epsilon must be positive");
}

Adam::Adam(std::vector<Network::ParamSlot> slots, AdamConfig config)
    : slots_(std::move(slots)), config_(config) {
  config_.validate();
  m_.reserve(slots_.size());
  v_.reserve(slots_.size());
  for (const auto& slot : slots_) {
    m_.push_back(Tensor::zeros(slot.value->shape()));
    v_.push_back(Tensor::zeros(slot.value->shape()));
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    auto& slot = slots_[s];
    if (!slot.grad->same_shape(*slot.value)) {
      throw ShapeError("adam: gradient shape mismatch for " + slot.name);
    }
    double* p = slot.value->data();
    const double* g = slot.grad->data();
    double* m = m_[s].data();
    double* v = v_[s].data();
    const std::size_t n = slot.value->size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw ValueError("adam: non-finite gradient in " + slot.name);
      }
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace polypnet
