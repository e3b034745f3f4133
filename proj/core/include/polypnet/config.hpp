#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypnet/augment.hpp"
#include "polypnet/dataset.hpp"
#include "polypnet/models.hpp"
#include "polypnet/train.hpp"

namespace polypnet {

struct DatasetConfig {
  std::string root;      // raw data root (images/ + masks/)
  std::string manifest;  // prepared manifest path
  std::size_t channels = 3;
  std::size_t input_h = 64, input_w = 64;
  std::uint64_t seed = 0;  // prepare-time master seed
  CropConfig crop{};
  bool stratified = true;
};

// The experiment file: dataset/augment/train blocks plus the named model
// grid. JSON with this shape (models is an ordered object keyed by grid
// names like "M1-4"):
//
// {
//   "dataset": {"root": "data", "manifest": "prep/manifest.csv",
//               "input_size": [64,64], "seed": 7},
//   "augment": {"horizontal_flip": true, "rotation_max_deg": 20.0,
//               "shift_max_frac": 0.1, "zoom_range": [0.9,1.1],
//               "fill_mode": "reflect"},
//   "train":   {"max_epochs": 3000, "patience": 200, "batch_size": 32,
//               "seed": 1, "adam": {"lr": 0.001}},
//   "output_root": "runs",
//   "models":  {"M1-4": {"family": "simple_cnn", "conv_blocks": 4,
//                        "dropout": [0.3, 0.3]}}
// }
struct ExperimentConfig {
  DatasetConfig dataset;
  AugmentConfig augment;
  TrainConfig train;
  std::string output_root = "runs";
  std::vector<ModelSpec> models;
};

/// Parses and validates; FormatError on malformed or unknown fields.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace polypnet
