#include "polypnet/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "polypnet/image_io.hpp"
#include "polypnet/rng.hpp"

namespace polypnet {

SyntheticConfig SyntheticConfig::easy(std::size_t count, std::size_t size) {
  SyntheticConfig cfg;
  cfg.count = count;
  cfg.size = size;
  cfg.noise = 0.02;
  cfg.gradient_max = 0.04;
  cfg.blob_amp_lo = 0.35;
  cfg.blob_amp_hi = 0.45;
  cfg.radius_lo_frac = 0.18;
  cfg.radius_hi_frac = 0.30;
  return cfg;
}

namespace {

struct Blob {
  double cx, cy, radius, amplitude;
};

// One image in [0,1]; blob is drawn when non-null. The same routine backs
// the sample and raw-pair generators so both views agree pixel for pixel.
Tensor render(const SyntheticConfig& cfg, Rng& rng, const Blob* blob) {
  const std::size_t s = cfg.size, c = cfg.channels;
  const double base = rng.uniform(cfg.background_lo, cfg.background_hi);
  const double gx = cfg.gradient_max > 0.0 ? rng.uniform(-cfg.gradient_max, cfg.gradient_max) : 0.0;
  const double gy = cfg.gradient_max > 0.0 ? rng.uniform(-cfg.gradient_max, cfg.gradient_max) : 0.0;
  // Per-channel tint keeps the channels from being identical copies.
  std::vector<double> tint(c);
  for (auto& t : tint) t = rng.uniform(-0.05, 0.05);

  std::vector<double> data(c * s * s);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(s) - 0.5;
      const double fy = static_cast<double>(y) / static_cast<double>(s) - 0.5;
      double v = base + gx * fx + gy * fy + rng.uniform(-cfg.noise, cfg.noise);
      if (blob != nullptr) {
        const double dx = static_cast<double>(x) - blob->cx;
        const double dy = static_cast<double>(y) - blob->cy;
        const double d2 = dx * dx + dy * dy;
        const double sigma = blob->radius / 1.8;
        v += blob->amplitude * std::exp(-d2 / (2.0 * sigma * sigma));
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        data[(ch * s + y) * s + x] = std::clamp(v + tint[ch], 0.0, 1.0);
      }
    }
  }
  return unchecked_tensor({c, s, s}, std::move(data));
}

Blob draw_blob(const SyntheticConfig& cfg, Rng& rng) {
  const double s = static_cast<double>(cfg.size);
  Blob b;
  b.radius = rng.uniform(cfg.radius_lo_frac * s, cfg.radius_hi_frac * s);
  b.cx = rng.uniform(b.radius, s - b.radius);
  b.cy = rng.uniform(b.radius, s - b.radius);
  b.amplitude = rng.uniform(cfg.blob_amp_lo, cfg.blob_amp_hi);
  return b;
}

}  // namespace

std::vector<Sample> make_blob_samples(const SyntheticConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(cfg.positive_fraction * static_cast<double>(cfg.count)));
  std::vector<Sample> samples;
  samples.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const bool positive = i < n_pos;
    Sample sample;
    if (positive) {
      const Blob blob = draw_blob(cfg, rng);
      sample.image = render(cfg, rng, &blob);
    } else {
      sample.image = render(cfg, rng, nullptr);
    }
    sample.label = positive ? 1 : 0;
    sample.origin_id = "synthetic-" + std::to_string(i);
    sample.crop = {0, 0, cfg.size, cfg.size};
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<RawPair> make_blob_pairs(const SyntheticConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(cfg.positive_fraction * static_cast<double>(cfg.count)));
  std::vector<RawPair> pairs;
  pairs.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const bool positive = i < n_pos;
    RawPair pair;
    Tensor img;
    Tensor mask = Tensor::zeros({cfg.size, cfg.size});
    if (positive) {
      const Blob blob = draw_blob(cfg, rng);
      img = render(cfg, rng, &blob);
      for (std::size_t y = 0; y < cfg.size; ++y) {
        for (std::size_t x = 0; x < cfg.size; ++x) {
          const double dx = static_cast<double>(x) - blob.cx;
          const double dy = static_cast<double>(y) - blob.cy;
          if (dx * dx + dy * dy <= blob.radius * blob.radius) mask[y * cfg.size + x] = 1.0;
        }
      }
    } else {
      img = render(cfg, rng, nullptr);
    }
    pair.image = mul(img, 255.0);
    pair.mask = std::move(mask);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    pair.id = std::string("img") + buf;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void write_blob_dataset(const SyntheticConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  for (const auto& pair : make_blob_pairs(cfg, seed)) {
    write_ppm(root / "images" / (pair.id + ".ppm"), pair.image);
    Tensor mask255 = mul(pair.mask, 255.0);
    write_pgm(root / "masks" / (pair.id + ".pgm"), mask255);
  }
}

}  // namespace polypnet
