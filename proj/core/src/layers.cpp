#include "polypnet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "polypnet/errors.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

namespace {

// Raw row-major product kernels shared by conv2d (via im2col) and dense.
// Per-element accumulation order is fixed, so results are bit-reproducible.

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
// The reduction runs in eight independent lanes so the compiler can keep it
// in vector registers; lane order is fixed, so results stay reproducible.
void gemm_abt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      std::size_t t = 0;
      for (; t + 8 <= k; t += 8) {
        for (std::size_t l = 0; l < 8; ++l) lane[l] += ai[t + l] * bj[t + l];
      }
      double tail = 0.0;
      for (; t < k; ++t) tail += ai[t] * bj[t];
      ci[j] += ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_atb_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) {
    const double* at = a + t * m;
    const double* bt = b + t * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = at[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

void require_batched_rank(const Tensor& x, std::size_t rank, const std::string& who) {
  if (x.rank() != rank) {
    throw ShapeError(who + ": expected rank-" + std::to_string(rank) + " batched input, got " +
                     shape_to_string(x.shape()));
  }
}

std::size_t out_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t pad,
                       const std::string& who) {
  const std::size_t padded = in + 2 * pad;
  if (window > padded) {
    throw ShapeError(who + ": window " + std::to_string(window) + " exceeds padded extent " +
                     std::to_string(padded));
  }
  const std::size_t span = padded - window;
  if (span % stride != 0) {
    throw ShapeError(who + ": extent " + std::to_string(in) + " with window " +
                     std::to_string(window) + ", stride " + std::to_string(stride) + ", pad " +
                     std::to_string(pad) + " gives a non-integral output extent");
  }
  return span / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t filters, std::size_t in_channels, std::size_t kernel_h,
               std::size_t kernel_w, std::size_t stride, std::size_t pad)
    : filters_(filters),
      in_channels_(in_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      pad_(pad),
      kernel_(Tensor::zeros({filters, in_channels, kernel_h, kernel_w})),
      bias_(Tensor::zeros({filters})),
      d_kernel_(Tensor::zeros({filters, in_channels, kernel_h, kernel_w})),
      d_bias_(Tensor::zeros({filters})) {
  if (filters == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0) {
    throw ValueError("conv2d: filters, channels, kernel extents and stride must be positive");
  }
}

std::vector<std::size_t> Conv2d::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 3) {
    throw ShapeError("conv2d: expected (C,H,W) input, got " + shape_to_string(in));
  }
  if (in[0] != in_channels_) {
    throw ShapeError("conv2d: input has " + std::to_string(in[0]) + " channels, kernel expects " +
                     std::to_string(in_channels_));
  }
  const std::size_t oh = out_extent(in[1], kernel_h_, stride_, pad_, "conv2d");
  const std::size_t ow = out_extent(in[2], kernel_w_, stride_, pad_, "conv2d");
  return {filters_, oh, ow};
}

namespace {

// col has one row per (c,ki,kj) kernel tap and one column per output pixel.
void im2col(const double* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            double* col) {
  const std::size_t plane = h * w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* xc = x + c * plane;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        double* dst = col + row * (oh * ow);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          double* drow = dst + oy * ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(drow, drow + ow, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                           ? 0.0
                           : xrow[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Scatter-add of the column gradient back onto the (padded-clipped) input.
void col2im_acc(const double* col, std::size_t channels, std::size_t h, std::size_t w,
                std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                std::size_t oh, std::size_t ow, double* dx) {
  const std::size_t plane = h * w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* xc = dx + c * plane;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        const double* src = col + row * (oh * ow);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* xrow = xc + static_cast<std::size_t>(iy) * w;
          const double* srow = src + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            xrow[static_cast<std::size_t>(ix)] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x, Mode, Rng*) {
  require_batched_rank(x, 4, "conv2d");
  const std::vector<std::size_t> per_sample{x.shape()[1], x.shape()[2], x.shape()[3]};
  const auto out_ps = output_shape(per_sample);
  const std::size_t n = x.shape()[0];
  const std::size_t h = per_sample[1], w = per_sample[2];
  const std::size_t oh = out_ps[1], ow = out_ps[2];
  const std::size_t taps = in_channels_ * kernel_h_ * kernel_w_;
  const std::size_t pixels = oh * ow;

  cached_input_ = x;
  std::vector<double> out(n * filters_ * pixels, 0.0);
  std::vector<double> col(taps * pixels);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data() + s * in_channels_ * h * w, in_channels_, h, w, kernel_h_, kernel_w_, stride_,
           pad_, oh, ow, col.data());
    double* out_s = out.data() + s * filters_ * pixels;
    gemm_nn_acc(kernel_.data(), col.data(), out_s, filters_, taps, pixels);
    for (std::size_t f = 0; f < filters_; ++f) {
      const double b = bias_[f];
      double* of = out_s + f * pixels;
      for (std::size_t i = 0; i < pixels; ++i) of[i] += b;
    }
  }
  return unchecked_tensor({n, filters_, oh, ow}, std::move(out));
}

Tensor Conv2d::backward(const Tensor& dout, bool param_grads) {
  const Tensor& x = cached_input_;
  const std::size_t n = x.shape()[0];
  const std::size_t h = x.shape()[2], w = x.shape()[3];
  const std::size_t oh = dout.shape()[2], ow = dout.shape()[3];
  const std::size_t taps = in_channels_ * kernel_h_ * kernel_w_;
  const std::size_t pixels = oh * ow;

  if (param_grads) {
    std::fill(d_kernel_.flat().begin(), d_kernel_.flat().end(), 0.0);
    std::fill(d_bias_.flat().begin(), d_bias_.flat().end(), 0.0);
  }
  std::vector<double> dx(x.size(), 0.0);
  std::vector<double> col(taps * pixels);
  std::vector<double> dcol(taps * pixels);
  for (std::size_t s = 0; s < n; ++s) {
    const double* dout_s = dout.data() + s * filters_ * pixels;
    im2col(x.data() + s * in_channels_ * h * w, in_channels_, h, w, kernel_h_, kernel_w_, stride_,
           pad_, oh, ow, col.data());
    if (param_grads) {
      gemm_abt_acc(dout_s, col.data(), d_kernel_.data(), filters_, pixels, taps);
      for (std::size_t f = 0; f < filters_; ++f) {
        const double* df = dout_s + f * pixels;
        double acc = 0.0;
        for (std::size_t i = 0; i < pixels; ++i) acc += df[i];
        d_bias_[f] += acc;
      }
    }
    std::fill(dcol.begin(), dcol.end(), 0.0);
    gemm_atb_acc(kernel_.data(), dout_s, dcol.data(), taps, filters_, pixels);
    col2im_acc(dcol.data(), in_channels_, h, w, kernel_h_, kernel_w_, stride_, pad_, oh, ow,
               dx.data() + s * in_channels_ * h * w);
  }
  return unchecked_tensor(x.shape(), std::move(dx));
}

std::string Conv2d::fingerprint() const {
  return "conv2d(f=" + std::to_string(filters_) + ",c=" + std::to_string(in_channels_) +
         ",k=" + std::to_string(kernel_h_) + "x" + std::to_string(kernel_w_) +
         ",s=" + std::to_string(stride_) + ",p=" + std::to_string(pad_) + ")";
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, Mode, Rng*) {
  cached_input_ = x;
  return map_elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor Relu::backward(const Tensor& dout, bool) {
  // Subgradient at exactly 0 is taken as 0.
  std::vector<double> dx(dout.size());
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx[i] = cached_input_[i] > 0.0 ? dout[i] : 0.0;
  }
  return unchecked_tensor(dout.shape(), std::move(dx));
}

// ---------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(std::size_t window_h, std::size_t window_w, std::size_t stride)
    : window_h_(window_h), window_w_(window_w), stride_(stride == 0 ? window_h : stride) {
  if (window_h == 0 || window_w == 0) throw ValueError("maxpool2d: window extents must be positive");
}

std::vector<std::size_t> MaxPool2d::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 3) {
    throw ShapeError("maxpool2d: expected (C,H,W) input, got " + shape_to_string(in));
  }
  const std::size_t oh = out_extent(in[1], window_h_, stride_, 0, "maxpool2d");
  const std::size_t ow = out_extent(in[2], window_w_, stride_, 0, "maxpool2d");
  return {in[0], oh, ow};
}

Tensor MaxPool2d::forward(const Tensor& x, Mode, Rng*) {
  require_batched_rank(x, 4, "maxpool2d");
  const std::vector<std::size_t> ps{x.shape()[1], x.shape()[2], x.shape()[3]};
  const auto out_ps = output_shape(ps);
  const std::size_t n = x.shape()[0], c = ps[0], h = ps[1], w = ps[2];
  const std::size_t oh = out_ps[1], ow = out_ps[2];

  cached_in_shape_ = x.shape();
  std::vector<double> out(n * c * oh * ow);
  argmax_.assign(out.size(), 0);
  const double* px = x.data();
  std::size_t oi = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* plane = px + (s * c + ch) * h * w;
      const std::size_t plane_base = (s * c + ch) * h * w;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++oi) {
          const std::size_t y0 = oy * stride_, x0 = ox * stride_;
          double best = plane[y0 * w + x0];
          std::size_t best_idx = y0 * w + x0;
          for (std::size_t ky = 0; ky < window_h_; ++ky) {
            for (std::size_t kx = 0; kx < window_w_; ++kx) {
              const std::size_t idx = (y0 + ky) * w + (x0 + kx);
              // First occurrence in row-major order wins ties.
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          out[oi] = best;
          argmax_[oi] = plane_base + best_idx;
        }
      }
    }
  }
  return unchecked_tensor({n, c, oh, ow}, std::move(out));
}

Tensor MaxPool2d::backward(const Tensor& dout, bool) {
  std::vector<double> dx(shape_product(cached_in_shape_), 0.0);
  for (std::size_t i = 0; i < dout.size(); ++i) dx[argmax_[i]] += dout[i];
  return unchecked_tensor(cached_in_shape_, std::move(dx));
}

std::string MaxPool2d::fingerprint() const {
  return "maxpool2d(k=" + std::to_string(window_h_) + "x" + std::to_string(window_w_) +
         ",s=" + std::to_string(stride_) + ")";
}

// ---------------------------------------------------------------- Flatten

std::vector<std::size_t> Flatten::output_shape(const std::vector<std::size_t>& in) const {
  return {shape_product(in)};
}

Tensor Flatten::forward(const Tensor& x, Mode, Rng*) {
  cached_in_shape_ = x.shape();
  const std::size_t n = x.shape()[0];
  return x.reshape({n, x.size() / n});
}

Tensor Flatten::backward(const Tensor& dout, bool) { return dout.reshape(cached_in_shape_); }

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out)
    : in_(in),
      out_(out),
      weight_(Tensor::zeros({in, out})),
      bias_(Tensor::zeros({out})),
      d_weight_(Tensor::zeros({in, out})),
      d_bias_(Tensor::zeros({out})) {
  if (in == 0 || out == 0) throw ValueError("dense: widths must be positive");
}

std::vector<std::size_t> Dense::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 1 || in[0] != in_) {
    throw ShapeError("dense: expected input width " + std::to_string(in_) + ", got " +
                     shape_to_string(in));
  }
  return {out_};
}

Tensor Dense::forward(const Tensor& x, Mode, Rng*) {
  require_batched_rank(x, 2, "dense");
  if (x.shape()[1] != in_) {
    throw ShapeError("dense: input width " + std::to_string(x.shape()[1]) + " != " +
                     std::to_string(in_));
  }
  cached_input_ = x;
  const std::size_t n = x.shape()[0];
  std::vector<double> out(n * out_, 0.0);
  gemm_nn_acc(x.data(), weight_.data(), out.data(), n, in_, out_);
  for (std::size_t s = 0; s < n; ++s) {
    double* row = out.data() + s * out_;
    for (std::size_t j = 0; j < out_; ++j) row[j] += bias_[j];
  }
  return unchecked_tensor({n, out_}, std::move(out));
}

Tensor Dense::backward(const Tensor& dout, bool param_grads) {
  const Tensor& x = cached_input_;
  const std::size_t n = x.shape()[0];
  if (param_grads) {
    std::fill(d_weight_.flat().begin(), d_weight_.flat().end(), 0.0);
    std::fill(d_bias_.flat().begin(), d_bias_.flat().end(), 0.0);
    gemm_atb_acc(x.data(), dout.data(), d_weight_.data(), in_, n, out_);
    for (std::size_t s = 0; s < n; ++s) {
      const double* row = dout.data() + s * out_;
      for (std::size_t j = 0; j < out_; ++j) d_bias_[j] += row[j];
    }
  }
  std::vector<double> dx(n * in_, 0.0);
  gemm_abt_acc(dout.data(), weight_.data(), dx.data(), n, out_, in_);
  return unchecked_tensor({n, in_}, std::move(dx));
}

std::string Dense::fingerprint() const {
  return "dense(in=" + std::to_string(in_) + ",out=" + std::to_string(out_) + ")";
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValueError("dropout rate must be in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::eval) {
    mask_.clear();
    return x;
  }
  if (rng == nullptr) throw ValueError("dropout in train mode requires an rng");
  const double keep_scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask_[i] = rng->next_double() < rate_ ? 0.0 : keep_scale;
    out[i] = x[i] * mask_[i];
  }
  return unchecked_tensor(x.shape(), std::move(out));
}

Tensor Dropout::backward(const Tensor& dout, bool) {
  if (mask_.empty()) return dout;  // eval-mode forward was the identity
  std::vector<double> dx(dout.size());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = dout[i] * mask_[i];
  return unchecked_tensor(dout.shape(), std::move(dx));
}

std::string Dropout::fingerprint() const { return "dropout(p=" + format_double(rate_) + ")"; }

// ---------------------------------------------------------------- heads

void require_binary_labels(const Tensor& labels) {
  for (double v : labels.flat()) {
    if (v != 0.0 && v != 1.0) {
      throw ValueError("labels must be exactly 0 or 1, got " + format_double(v));
    }
  }
}

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::vector<std::size_t> SigmoidBceHead::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 1 || in[0] != 1) {
    throw ShapeError("sigmoid_head expects a single logit, got " + shape_to_string(in));
  }
  return {1};
}

Tensor SigmoidBceHead::forward(const Tensor& x, Mode, Rng*) {
  require_batched_rank(x, 2, "sigmoid_head");
  logits_ = x;
  probs_ = map_elementwise(x, stable_sigmoid);
  return probs_;
}

Tensor SigmoidBceHead::backward(const Tensor&, bool) {
  throw ValueError("sigmoid_head backward flows from loss_grad, not a downstream gradient");
}

double SigmoidBceHead::loss(const Tensor& labels) const {
  require_binary_labels(labels);
  if (!labels.same_shape(logits_)) {
    throw ShapeError("labels shape " + shape_to_string(labels.shape()) +
                     " != logits shape " + shape_to_string(logits_.shape()));
  }
  // max(z,0) - z*y + log1p(exp(-|z|)): the log-sum-exp form of BCE.
  double total = 0.0;
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    const double z = logits_[i];
    total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits_.size());
}

Tensor SigmoidBceHead::loss_grad(const Tensor& labels) const {
  require_binary_labels(labels);
  const double inv_n = 1.0 / static_cast<double>(logits_.size());
  std::vector<double> g(logits_.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (probs_[i] - labels[i]) * inv_n;
  return unchecked_tensor(logits_.shape(), std::move(g));
}

std::vector<std::size_t> Softmax2Head::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 1 || in[0] != 2) {
    throw ShapeError("softmax2_head expects two logits, got " + shape_to_string(in));
  }
  return {1};
}

Tensor Softmax2Head::forward(const Tensor& x, Mode, Rng*) {
  require_batched_rank(x, 2, "softmax2_head");
  logits_ = x;
  const std::size_t n = x.shape()[0];
  std::vector<double> p1(n);
  for (std::size_t i = 0; i < n; ++i) {
    // p(class 1) = sigmoid(z1 - z0)
    p1[i] = stable_sigmoid(x[2 * i + 1] - x[2 * i]);
  }
  return unchecked_tensor({n, 1}, std::move(p1));
}

Tensor Softmax2Head::backward(const Tensor&, bool) {
  throw ValueError("softmax2_head backward flows from loss_grad, not a downstream gradient");
}

double Softmax2Head::loss(const Tensor& labels) const {
  require_binary_labels(labels);
  const std::size_t n = logits_.shape()[0];
  if (labels.size() != n) {
    throw ShapeError("labels count " + std::to_string(labels.size()) + " != batch " +
                     std::to_string(n));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z0 = logits_[2 * i], z1 = logits_[2 * i + 1];
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const double zy = labels[i] == 1.0 ? z1 : z0;
    total += lse - zy;
  }
  return total / static_cast<double>(n);
}

Tensor Softmax2Head::loss_grad(const Tensor& labels) const {
  require_binary_labels(labels);
  const std::size_t n = logits_.shape()[0];
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> g(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = stable_sigmoid(logits_[2 * i + 1] - logits_[2 * i]);
    const double y = labels[i];
    g[2 * i] = ((1.0 - p1) - (1.0 - y)) * inv_n;
    g[2 * i + 1] = (p1 - y) * inv_n;
  }
  return unchecked_tensor(logits_.shape(), std::move(g));
}

}  // namespace polypnet
