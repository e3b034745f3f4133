#include "polypnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "polypnet/errors.hpp"

namespace polypnet {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor() : shape_{}, data_{0.0} {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ValueError("tensor construction rejects non-finite elements");
  }
}

Tensor::Tensor(Unchecked, std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor unchecked_tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  return Tensor(Tensor::Unchecked{}, std::move(shape), std::move(data));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::vector<double> data(shape_product(shape), 0.0);
  return unchecked_tensor(std::move(shape), std::move(data));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::vector<double> data(shape_product(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::reshape(std::vector<std::size_t> new_shape) const {
  for (std::size_t e : new_shape) {
    if (e == 0) throw ShapeError("reshape extents must be positive");
  }
  if (shape_product(new_shape) != data_.size()) {
    throw ShapeError("reshape to " + shape_to_string(new_shape) + " does not preserve " +
                     std::to_string(data_.size()) + " elements");
  }
  return unchecked_tensor(std::move(new_shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul requires rank-2 operands, got " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  // i-k-j order: the inner loop runs over contiguous rows of b and out, which
  // keeps the accumulation order per element identical to the naive loop.
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.data() + i * n;
    const double* ai = pa + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = pb + t * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += av * bt[j];
    }
  }
  return unchecked_tensor({m, n}, std::move(out));
}

namespace {

enum class BinOp { add, sub, mul };

double apply(BinOp op, double x, double y) {
  switch (op) {
    case BinOp::add: return x + y;
    case BinOp::sub: return x - y;
    case BinOp::mul: return x * y;
  }
  return 0.0;
}

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  if (a.same_shape(b)) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, a[i], b[i]);
    return unchecked_tensor(a.shape(), std::move(out));
  }
  if (b.size() == 1) {
    const double s = b[0];
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, a[i], s);
    return unchecked_tensor(a.shape(), std::move(out));
  }
  if (a.size() == 1) {
    const double s = a[0];
    std::vector<double> out(b.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, s, b[i]);
    return unchecked_tensor(b.shape(), std::move(out));
  }
  throw ShapeError("elementwise op on incompatible shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul); }
Tensor add(const Tensor& a, double s) { return map_elementwise(a, [s](double x) { return x + s; }); }
Tensor sub(const Tensor& a, double s) { return map_elementwise(a, [s](double x) { return x - s; }); }
Tensor mul(const Tensor& a, double s) { return map_elementwise(a, [s](double x) { return x * s; }); }

namespace {

double reduce_all(const Tensor& t, Reduce kind) {
  const double* p = t.data();
  const std::size_t n = t.size();
  if (kind == Reduce::max) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, p[i]);
    return best;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += p[i];
  return kind == Reduce::mean ? acc / static_cast<double>(n) : acc;
}

}  // namespace

Tensor reduce(const Tensor& t, Reduce kind, std::optional<std::size_t> axis) {
  if (!axis.has_value()) {
    return unchecked_tensor({}, {reduce_all(t, kind)});
  }
  const std::size_t ax = *axis;
  if (ax >= t.rank()) {
    throw ShapeError("reduce axis " + std::to_string(ax) + " out of range for shape " +
                     shape_to_string(t.shape()));
  }
  const auto& shape = t.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= shape[i];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t extent = shape[ax];

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != ax) out_shape.push_back(shape[i]);
  }
  std::vector<double> out(outer * inner,
                          kind == Reduce::max ? -std::numeric_limits<double>::infinity() : 0.0);
  const double* p = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t e = 0; e < extent; ++e) {
      const double* src = p + (o * extent + e) * inner;
      double* dst = out.data() + o * inner;
      if (kind == Reduce::max) {
        for (std::size_t i = 0; i < inner; ++i) dst[i] = std::max(dst[i], src[i]);
      } else {
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  }
  if (kind == Reduce::mean) {
    for (double& v : out) v /= static_cast<double>(extent);
  }
  return unchecked_tensor(std::move(out_shape), std::move(out));
}

double sum(const Tensor& t) { return reduce_all(t, Reduce::sum); }
double mean(const Tensor& t) { return reduce_all(t, Reduce::mean); }
double max_value(const Tensor& t) { return reduce_all(t, Reduce::max); }

Tensor rng_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  if (!(lo < hi)) throw ValueError("rng_uniform: lo must be < hi");
  std::vector<double> data(shape_product(shape));
  for (double& v : data) v = lo + (hi - lo) * rng.next_double();
  return unchecked_tensor(std::move(shape), std::move(data));
}

}  // namespace polypnet
