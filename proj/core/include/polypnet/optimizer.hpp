#pragma once

#include <cstdint>
#include <vector>

#include "polypnet/network.hpp"
#include "polypnet/tensor.hpp"

namespace polypnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;  // ValueError outside lr>0, betas in [0,1), eps>0
};

// Adam with bias correction. Bound to the parameter slots it is given at
// construction; frozen parameters are simply never handed to it, so they
// accumulate no moment state. Single-owner, mutated in place by step().
class Adam {
 public:
  explicit Adam(std::vector<Network::ParamSlot> slots, AdamConfig config = {});

  /// One update over all bound parameters:
  ///   m <- b1 m + (1-b1) g        v <- b2 v + (1-b2) g^2
  ///   p <- p - lr * m-hat / (sqrt(v-hat) + eps)
  /// Throws ShapeError on grad/param shape drift and ValueError (naming the
  /// parameter) on non-finite gradients.
  void step();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Network::ParamSlot> slots_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace polypnet
