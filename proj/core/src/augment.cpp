#include "polypnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "polypnet/errors.hpp"

namespace polypnet {

bool AugmentConfig::identity() const {
  return !horizontal_flip && !vertical_flip && rotation_max_deg == 0.0 && shift_max_frac == 0.0 &&
         zoom_range.first == 1.0 && zoom_range.second == 1.0;
}

void AugmentConfig::validate() const {
  if (rotation_max_deg < 0.0) throw ValueError("rotation_max_deg must be >= 0");
  if (shift_max_frac < 0.0 || shift_max_frac > 0.5) {
    throw ValueError("shift_max_frac must be in [0, 0.5]");
  }
  if (!(zoom_range.first > 0.0 && zoom_range.second <= 2.0 &&
        zoom_range.first <= zoom_range.second)) {
    throw ValueError("zoom_range must satisfy 0 < lo <= hi <= 2");
  }
}

namespace {

void flip_horizontal(Tensor& image) {
  const std::size_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      double* row = image.data() + (ch * h + y) * w;
      std::reverse(row, row + w);
    }
  }
}

void flip_vertical(Tensor& image) {
  const std::size_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      double* a = image.data() + (ch * h + y) * w;
      double* b = image.data() + (ch * h + (h - 1 - y)) * w;
      std::swap_ranges(a, a + w, b);
    }
  }
}

double reflect_coord(double v, double n) {
  // Mirror 'v' into [0, n-1] (reflection about pixel centers).
  if (n <= 1.0) return 0.0;
  const double period = 2.0 * (n - 1.0);
  v = std::fmod(std::abs(v), period);
  return v <= n - 1.0 ? v : period - v;
}

double sample_bilinear(const double* plane, std::size_t h, std::size_t w, double fy, double fx,
                       FillMode fill) {
  if (fill == FillMode::constant0) {
    if (fy < 0.0 || fx < 0.0 || fy > static_cast<double>(h - 1) ||
        fx > static_cast<double>(w - 1)) {
      return 0.0;
    }
  } else {
    fy = reflect_coord(fy, static_cast<double>(h));
    fx = reflect_coord(fx, static_cast<double>(w));
  }
  const std::size_t y0 = static_cast<std::size_t>(fy);
  const std::size_t x0 = static_cast<std::size_t>(fx);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const double wy = fy - static_cast<double>(y0);
  const double wx = fx - static_cast<double>(x0);
  const double top = plane[y0 * w + x0] + wx * (plane[y0 * w + x1] - plane[y0 * w + x0]);
  const double bot = plane[y1 * w + x0] + wx * (plane[y1 * w + x1] - plane[y1 * w + x0]);
  return top + wy * (bot - top);
}

}  // namespace

Sample augment_sample(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  Sample out = sample;
  if (cfg.identity()) return out;

  const std::size_t c = out.image.shape()[0], h = out.image.shape()[1], w = out.image.shape()[2];

  // Flips are exact permutations, drawn as a coin per enabled axis.
  if (cfg.horizontal_flip && rng.bernoulli(0.5)) flip_horizontal(out.image);
  if (cfg.vertical_flip && rng.bernoulli(0.5)) flip_vertical(out.image);

  double angle_deg = 0.0, shift_x = 0.0, shift_y = 0.0, zoom = 1.0;
  if (cfg.rotation_max_deg > 0.0) {
    angle_deg = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
  }
  if (cfg.shift_max_frac > 0.0) {
    shift_x = rng.uniform(-cfg.shift_max_frac, cfg.shift_max_frac) * static_cast<double>(w);
    shift_y = rng.uniform(-cfg.shift_max_frac, cfg.shift_max_frac) * static_cast<double>(h);
  }
  if (cfg.zoom_range != std::pair<double, double>{1.0, 1.0}) {
    zoom = rng.uniform(cfg.zoom_range.first, cfg.zoom_range.second);
  }
  if (angle_deg == 0.0 && shift_x == 0.0 && shift_y == 0.0 && zoom == 1.0) return out;

  // Output pixel -> source pixel: invert zoom(shift(rotate(.))) about the
  // image center, then resample once.
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double cosr = std::cos(-rad), sinr = std::sin(-rad);

  Tensor warped = Tensor::zeros(out.image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = out.image.data() + ch * h * w;
    double* dst = warped.data() + ch * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        // undo zoom
        double ux = (static_cast<double>(x) - cx) / zoom;
        double uy = (static_cast<double>(y) - cy) / zoom;
        // undo shift
        ux -= shift_x;
        uy -= shift_y;
        // undo rotation
        const double sx = cosr * ux - sinr * uy + cx;
        const double sy = sinr * ux + cosr * uy + cy;
        const double v = sample_bilinear(src, h, w, sy, sx, cfg.fill_mode);
        dst[y * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  out.image = std::move(warped);
  return out;
}

DataGenerator::DataGenerator(std::vector<Sample> samples, AugmentConfig cfg,
                             std::size_t batch_size, Rng rng)
    : samples_(std::move(samples)), cfg_(cfg), batch_size_(batch_size), rng_(rng) {
  if (samples_.empty()) throw ValueError("data generator needs a non-empty split");
  if (batch_size_ == 0) throw ValueError("batch_size must be >= 1");
  cfg_.validate();
  start_epoch();
}

void DataGenerator::start_epoch() {
  order_.resize(samples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rng_.shuffle(order_.begin(), order_.end());
  cursor_ = 0;
}

std::size_t DataGenerator::batches_per_epoch() const {
  return (samples_.size() + batch_size_ - 1) / batch_size_;
}

Batch DataGenerator::next() {
  const std::size_t n = std::min(batch_size_, samples_.size() - cursor_);
  const auto& shape = samples_[0].image.shape();
  const std::size_t sample_len = shape_product(shape);

  std::vector<double> images(n * sample_len);
  std::vector<double> labels(n);
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) {
    indices[i] = order_[cursor_ + i];
    const Sample& raw = samples_[order_[cursor_ + i]];
    if (cfg_.identity()) {
      std::copy(raw.image.flat().begin(), raw.image.flat().end(), images.begin() + i * sample_len);
    } else {
      const Sample aug = augment_sample(raw, cfg_, rng_);
      std::copy(aug.image.flat().begin(), aug.image.flat().end(), images.begin() + i * sample_len);
    }
    labels[i] = static_cast<double>(raw.label);
  }

  Batch batch;
  std::vector<std::size_t> bshape{n};
  bshape.insert(bshape.end(), shape.begin(), shape.end());
  batch.images = unchecked_tensor(std::move(bshape), std::move(images));
  batch.labels = unchecked_tensor({n, 1}, std::move(labels));
  batch.indices = std::move(indices);
  batch.epoch = epoch_;

  cursor_ += n;
  if (cursor_ >= samples_.size()) {
    batch.epoch_end = true;
    ++epoch_;
    start_epoch();
  }
  return batch;
}

}  // namespace polypnet
