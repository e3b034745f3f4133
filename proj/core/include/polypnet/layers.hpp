#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "polypnet/rng.hpp"
#include "polypnet/tensor.hpp"

namespace polypnet {

enum class Mode { train, eval };

// One layer of the stack. forward caches whatever backward needs, so a layer
// instance is single-owner while training; backward(dout, param_grads)
// returns the gradient w.r.t. its input and, when param_grads is set,
// overwrites the gradient tensors returned by grads().
//
// Shapes exclude the batch dimension: output_shape maps per-sample input
// extents to per-sample output extents and throws ShapeError on mismatch,
// which is how Network validates a stack at construction time.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dout, bool param_grads) = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
  virtual std::vector<std::string> param_names() const { return {}; }

  /// Architecture token, e.g. "conv2d(f=16,c=3,k=3x3,s=1,p=1)". The network
  /// fingerprint is the join of these tokens and is parseable back into an
  /// identical stack.
  virtual std::string fingerprint() const = 0;

  virtual bool is_head() const { return false; }
};

/// Classification head: maps logits to probabilities in forward and exposes
/// the batch-mean loss plus its gradient w.r.t. the cached logits.
class HeadLayer : public Layer {
 public:
  bool is_head() const override { return true; }
  virtual double loss(const Tensor& labels) const = 0;
  virtual Tensor loss_grad(const Tensor& labels) const = 0;
};

// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t filters, std::size_t in_channels, std::size_t kernel_h, std::size_t kernel_w,
         std::size_t stride = 1, std::size_t pad = 0);

  std::string kind() const override { return "conv2d"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::vector<Tensor*> params() override { return {&kernel_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&d_kernel_, &d_bias_}; }
  std::vector<std::string> param_names() const override { return {"kernel", "bias"}; }
  std::string fingerprint() const override;

  Tensor& kernel() { return kernel_; }
  Tensor& bias() { return bias_; }
  std::size_t stride() const { return stride_; }
  std::size_t pad() const { return pad_; }

 private:
  std::size_t filters_, in_channels_, kernel_h_, kernel_w_, stride_, pad_;
  Tensor kernel_, bias_;
  Tensor d_kernel_, d_bias_;
  Tensor cached_input_;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override { return in; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override { return "relu"; }

 private:
  Tensor cached_input_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(std::size_t window_h, std::size_t window_w, std::size_t stride = 0);

  std::string kind() const override { return "maxpool2d"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override;

 private:
  std::size_t window_h_, window_w_, stride_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> cached_in_shape_;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override { return "flatten"; }

 private:
  std::vector<std::size_t> cached_in_shape_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out);

  std::string kind() const override { return "dense"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&d_weight_, &d_bias_}; }
  std::vector<std::string> param_names() const override { return {"weight", "bias"}; }
  std::string fingerprint() const override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor weight_, bias_;
  Tensor d_weight_, d_bias_;
  Tensor cached_input_;
};

// Inverted dropout: training scales survivors by 1/(1-p) so evaluation is
// exactly the identity. backward reuses the mask drawn by the last forward.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  std::string kind() const override { return "dropout"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override { return in; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override;

  double rate() const { return rate_; }

 private:
  double rate_;
  std::vector<double> mask_;  // scale per element: 0 or 1/(1-p)
};

// Single-logit sigmoid with binary cross-entropy, evaluated in the
// log-sum-exp form so saturated logits neither overflow nor lose the loss.
class SigmoidBceHead final : public HeadLayer {
 public:
  std::string kind() const override { return "sigmoid_head"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override { return "sigmoid_head"; }

  double loss(const Tensor& labels) const override;
  Tensor loss_grad(const Tensor& labels) const override;

 private:
  Tensor logits_, probs_;
};

// Two-way softmax with cross-entropy over [N,2] logits; emits the positive
// class probability so its output contract matches the sigmoid head.
class Softmax2Head final : public HeadLayer {
 public:
  std::string kind() const override { return "softmax2_head"; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dout, bool param_grads) override;
  std::string fingerprint() const override { return "softmax2_head"; }

  double loss(const Tensor& labels) const override;
  Tensor loss_grad(const Tensor& labels) const override;

 private:
  Tensor logits_;  // [N,2]
};

/// Throws ValueError unless every element is exactly 0 or 1.
void require_binary_labels(const Tensor& labels);

}  // namespace polypnet
