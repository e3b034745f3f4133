#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "polypnet/dataset.hpp"
#include "polypnet/rng.hpp"
#include "polypnet/tensor.hpp"

namespace polypnet {

enum class FillMode { reflect, constant0 };

// Label-preserving transform ranges. The all-off default is the identity
// transform, bit for bit.
struct AugmentConfig {
  bool horizontal_flip = false;
  bool vertical_flip = false;
  double rotation_max_deg = 0.0;        // >= 0
  double shift_max_frac = 0.0;          // in [0, 0.5], fraction of each extent
  std::pair<double, double> zoom_range{1.0, 1.0};  // multiplicative, in (0, 2]
  FillMode fill_mode = FillMode::reflect;

  bool identity() const;
  void validate() const;  // ValueError outside the declared ranges
};

/// Applies flip -> rotate -> shift -> zoom with parameters drawn from cfg.
/// Flips are exact pixel permutations (coin per enabled axis); the remaining
/// transforms compose into one affine warp resampled bilinearly. Output is
/// clamped to [0,1]; shape, label and origin are unchanged.
Sample augment_sample(const Sample& sample, const AugmentConfig& cfg, Rng& rng);

struct Batch {
  Tensor images;  // [B,C,h,w]
  Tensor labels;  // [B,1]
  std::vector<std::size_t> indices;  // positions in the generator's sample list
  std::size_t epoch = 0;  // 0-based epoch this batch belongs to
  bool epoch_end = false;
};

// Streams shuffled epochs over the training samples, augmenting each sample
// freshly per epoch (identity config passes raw samples through). The final
// partial batch is emitted; epoch boundaries are flagged on the last batch.
// Deterministic in the rng it is constructed with.
class DataGenerator {
 public:
  DataGenerator(std::vector<Sample> samples, AugmentConfig cfg, std::size_t batch_size, Rng rng);

  Batch next();
  std::size_t batches_per_epoch() const;
  std::size_t sample_count() const { return samples_.size(); }
  std::size_t epoch() const { return epoch_; }

 private:
  std::vector<Sample> samples_;
  AugmentConfig cfg_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;

  void start_epoch();
};

}  // namespace polypnet
