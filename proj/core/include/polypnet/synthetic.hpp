#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "polypnet/dataset.hpp"

namespace polypnet {

// Seeded bright-blob image generator for smoke tests and demos: positives
// carry one bright disk over a noisy textured background, negatives carry
// the background only. Intensities are fractions of full scale.
struct SyntheticConfig {
  std::size_t count = 400;
  std::size_t size = 64;          // square images
  std::size_t channels = 3;
  double positive_fraction = 0.5;
  double background_lo = 0.25, background_hi = 0.55;
  double gradient_max = 0.12;    // smooth shading slope across the image
  double noise = 0.08;           // per-pixel uniform noise amplitude
  double blob_amp_lo = 0.18, blob_amp_hi = 0.38;
  double radius_lo_frac = 0.10, radius_hi_frac = 0.22;  // of image size

  /// High-contrast, low-noise variant: linearly separable at a glance.
  static SyntheticConfig easy(std::size_t count, std::size_t size);
};

/// Ready-to-train samples (images in [0,1], balanced labels, seeded order).
std::vector<Sample> make_blob_samples(const SyntheticConfig& cfg, std::uint64_t seed);

/// Raw image/mask pairs in [0,255] (mask = the blob's disk, empty for negatives).
std::vector<RawPair> make_blob_pairs(const SyntheticConfig& cfg, std::uint64_t seed);

/// Writes pairs as <root>/images/*.ppm and <root>/masks/*.pgm.
void write_blob_dataset(const SyntheticConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& root);

}  // namespace polypnet
