#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polypnet/network.hpp"
#include "polypnet/tensor.hpp"

namespace polypnet {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// On-disk model weights. Binary layout (all integers little-endian):
//
//   magic "PNW1"
//   u32 fingerprint length, fingerprint bytes
//   per tensor, in layer order:
//     u32 name length, name bytes
//     u32 rank
//     u64 extent per dimension
//     f64 value per element (IEEE-754 little-endian, row-major)
//
// The writer is canonical, so save -> load -> save is byte-identical.
class WeightContainer {
 public:
  WeightContainer() = default;  // empty container
  WeightContainer(std::string fingerprint, std::vector<NamedTensor> tensors);

  const std::string& fingerprint() const { return fingerprint_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  void save(const std::filesystem::path& path) const;
  static WeightContainer load(const std::filesystem::path& path);

 private:
  std::string fingerprint_;
  std::vector<NamedTensor> tensors_;
};

/// Copies all parameters (trainable or not) out of the network.
WeightContainer snapshot(const Network& net);

/// Loads parameters into a network whose fingerprint matches; FormatError
/// names the first mismatched tensor otherwise.
void load_into(Network& net, const WeightContainer& weights);

/// Rebuilds the architecture from the container's fingerprint and loads the
/// weights into it.
Network restore_network(const WeightContainer& weights);

}  // namespace polypnet
