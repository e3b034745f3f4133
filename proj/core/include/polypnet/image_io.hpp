#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polypnet/tensor.hpp"

namespace polypnet {

// Accepted encodings: PNG, binary PPM (P6) and binary PGM (P5), all 8-bit.
// Images load as [C,H,W] tensors with values in [0,255]; masks load as [H,W]
// binary tensors (file pixels must be exactly 0 or 255, or already 0/1).

Tensor read_image(const std::filesystem::path& path);
Tensor read_mask(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Tensor& image);  // [3,H,W]
void write_pgm(const std::filesystem::path& path, const Tensor& gray);   // [H,W]

bool supported_image_extension(const std::filesystem::path& path);

}  // namespace polypnet
