#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polypnet/rng.hpp"

namespace polypnet {

// Dense n-dimensional array of doubles in row-major order. Extents are
// positive and immutable after construction (reshape returns a new value);
// the validating constructor rejects non-finite elements. Values are plain
// value types: copies are deep, const tensors are safe to share across
// threads.
class Tensor {
 public:
  /// Rank-0 scalar holding 0.
  Tensor();
  /// Validating constructor; throws ShapeError on extent/length mismatch and
  /// ValueError on non-finite elements.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> flat() const& { return data_; }
  std::span<double> flat() & { return data_; }
  // A span into a temporary would dangle.
  std::span<const double> flat() const&& = delete;
  std::span<double> flat() && = delete;
  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Same data, new extents; element count must be preserved.
  Tensor reshape(std::vector<std::size_t> new_shape) const;

 private:
  struct Unchecked {};
  Tensor(Unchecked, std::vector<std::size_t> shape, std::vector<double> data);

  std::vector<std::size_t> shape_;
  std::vector<double> data_;

  friend Tensor unchecked_tensor(std::vector<std::size_t>, std::vector<double>);
};

/// Internal fast path: skips the finite-data validation. Computed results may
/// legitimately hold inf/nan (overflowing losses are detected downstream).
Tensor unchecked_tensor(std::vector<std::size_t> shape, std::vector<double> data);

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Row-major [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

template <typename F>
Tensor map_elementwise(const Tensor& t, F f) {
  std::vector<double> out(t.size());
  const double* src = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(src[i]);
  return unchecked_tensor(t.shape(), std::move(out));
}

// Binary elementwise ops accept equal shapes or a scalar (single-element)
// operand on either side; anything else is a ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);

enum class Reduce { sum, mean, max };

/// Reduce along one axis (axis removed from the shape) or, with no axis, over
/// all elements to a rank-0 tensor.
Tensor reduce(const Tensor& t, Reduce kind, std::optional<std::size_t> axis = std::nullopt);

double sum(const Tensor& t);
double mean(const Tensor& t);
double max_value(const Tensor& t);

/// Tensor of i.i.d. uniform draws in [lo,hi), filled in row-major order.
Tensor rng_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi);

}  // namespace polypnet
