#pragma once

#include <memory>
#include <string>
#include <vector>

#include "polypnet/layers.hpp"

namespace polypnet {

// Ordered layer stack with an explicit per-sample input shape. Construction
// walks the stack through Layer::output_shape, so any adjacent-layer mismatch
// that would fail at forward time is rejected up front.
//
// A Network is single-owner while training (layers cache forward state);
// distinct instances may run on distinct threads.
class Network {
 public:
  Network(std::vector<std::size_t> input_shape, std::vector<std::unique_ptr<Layer>> layers);

  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  /// Batched forward; x shape must be [N] + input_shape. Returns the head's
  /// probabilities when the stack ends in a head, else the last layer output.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr);

  /// Batch-mean loss of the trailing head against binary labels [N,1].
  double loss(const Tensor& labels) const;

  /// Backpropagates from the head's loss gradient, filling parameter
  /// gradients on every trainable layer. Valid right after a forward pass.
  void backward(const Tensor& labels);

  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  void set_trainable(std::size_t layer_index, bool trainable);
  bool trainable(std::size_t layer_index) const { return trainable_[layer_index]; }

  struct ParamSlot {
    std::string name;  // "<kind><ordinal>.<param>", e.g. "conv1.kernel"
    Tensor* value;
    Tensor* grad;
  };
  /// Every parameter in layer order.
  std::vector<ParamSlot> param_slots();
  /// Parameters of trainable layers only (what the optimizer sees).
  std::vector<ParamSlot> trainable_slots();

  std::size_t parameter_count() const;

  /// "pnw1|in:3x64x64|conv2d(...)|relu|..." - a parseable architecture id.
  const std::string& fingerprint() const { return fingerprint_; }

  bool has_head() const;

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<bool> trainable_;
  std::string fingerprint_;
};

/// Rebuilds the exact layer stack encoded in a fingerprint (zeroed weights).
Network network_from_fingerprint(const std::string& fingerprint);

}  // namespace polypnet
