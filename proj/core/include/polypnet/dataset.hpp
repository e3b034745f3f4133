#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "polypnet/rng.hpp"
#include "polypnet/tensor.hpp"

namespace polypnet {

/// Source image [C,H,W] in [0,255] with its binary ground-truth mask [H,W].
struct RawPair {
  Tensor image;
  Tensor mask;
  std::string id;
};

struct CropRect {
  std::size_t x = 0, y = 0, w = 0, h = 0;
};

/// One labeled training sample: a cropped, resized, [0,1]-scaled image.
struct Sample {
  Tensor image;  // [C,out_h,out_w], values in [0,1]
  int label = 0;  // 1 = polyp (positive class), 0 = normal
  std::string origin_id;
  CropRect crop;
};

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct LabeledDataset {
  std::vector<Sample> samples;
  std::vector<Split> split;  // parallel to samples
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices_of(Split s) const;
  std::vector<Sample> samples_of(Split s) const;
};

struct CropConfig {
  std::size_t crop_size = 64;          // minimum side of a polyp crop; normal-window side
  std::size_t out_h = 64, out_w = 64;  // fixed sample size after resize
  std::size_t normals_per_image = 1;
  double margin_frac = 0.10;  // context margin per side of a region's bounding box
  std::size_t max_attempts = 100;  // rejection budget per requested normal crop
};

/// One polyp sample per connected mask region (bounding box grown by the
/// margin, widened to crop_size, clipped to bounds) plus up to
/// normals_per_image rejection-sampled crops with zero mask overlap.
std::vector<Sample> generate_labeled_crops(const RawPair& pair, const CropConfig& cfg, Rng& rng);

/// Bilinear resample to (out_h, out_w), then scale into [0,1] by 1/255.
Tensor resize_and_scale(const Tensor& image, std::size_t out_h, std::size_t out_w);

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

/// Seeded shuffle, then floor(train)/floor(val)/remainder sizes; stratified
/// applies the same floor rule per class and concatenates.
LabeledDataset split_dataset(std::vector<Sample> samples, SplitRatios ratios, std::uint64_t seed,
                             bool stratified = true);

// ---------------------------------------------------------------- manifest

struct ManifestRow {
  std::string origin_id;
  CropRect crop;
  int label = 0;
  Split split = Split::train;
};

// The manifest plus the raw data root regenerate every sample bit-identically.
struct Manifest {
  std::uint64_t seed = 0;
  std::size_t out_h = 64, out_w = 64;
  std::vector<ManifestRow> rows;
};

void write_manifest(const LabeledDataset& dataset, std::size_t out_h, std::size_t out_w,
                    const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Pairs <root>/images/<id>.<ext> with <root>/masks/<id>.<ext> by filename
/// stem; every image must have a mask.
std::vector<RawPair> load_data_root(const std::filesystem::path& root);

/// Rebuilds the dataset described by a manifest from the raw images under root.
LabeledDataset regenerate_dataset(const Manifest& manifest, const std::filesystem::path& root);

}  // namespace polypnet
