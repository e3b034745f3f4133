#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "polypnet/network.hpp"
#include "polypnet/rng.hpp"
#include "polypnet/weights.hpp"

namespace polypnet {

enum class ModelFamily { simple_cnn, vgg_feature_extractor };
enum class HeadKind { sigmoid, softmax2 };
enum class VggDepth { mini, vgg19 };

// One named model configuration (the grid is keyed by names like "M1-4").
// Filter counts, kernel size and head width have recorded defaults; the
// name/family/dropout/augment axes mirror the reference grid.
struct ModelSpec {
  std::string name = "model";
  ModelFamily family = ModelFamily::simple_cnn;
  int conv_blocks = 4;  // simple_cnn: 3 or 4
  std::size_t base_width = 16;  // doubles per block
  std::size_t head_width = 64;
  std::vector<double> dropout;  // 0-2 rates: after the conv stack, after the hidden dense
  bool augment = false;
  bool fine_tune = false;  // vgg only: unfreeze the backbone
  VggDepth vgg_depth = VggDepth::mini;  // mini = 8-conv scaled-down stack
  HeadKind head = HeadKind::sigmoid;
  std::array<std::size_t, 3> input_shape{3, 64, 64};
  std::optional<std::string> backbone_weights;  // external container path (vgg)

  void validate() const;
};

/// conv_blocks x [conv3x3(same) -> relu -> maxpool2x2] -> [dropout] ->
/// flatten -> dense(head_width) -> relu -> [dropout] -> dense -> head.
Network build_simple_cnn(const ModelSpec& spec, Rng& init_rng);

/// VGG-style conv stack (frozen unless fine_tune) + fresh classification
/// head; backbone weights loaded from the container when provided, else
/// seeded-random initialized.
Network build_vgg_feature_extractor(const ModelSpec& spec, Rng& init_rng,
                                    const WeightContainer* backbone = nullptr);

Network build_model(const ModelSpec& spec, Rng& init_rng,
                    const WeightContainer* backbone = nullptr);

/// Family/flag description matching the reference grid vocabulary:
/// "3CNN", "4CNN", "Augment", "Fine Tune Augment", "".
std::string model_description(const ModelSpec& spec);

/// The full named model grid (M1-1 .. M3-11) at the given input shape.
std::vector<ModelSpec> table1_model_grid(std::array<std::size_t, 3> input_shape = {3, 64, 64});

/// Glorot-uniform initialization of every conv/dense parameter (biases zero),
/// drawn from the given generator in layer order.
void glorot_init(Network& net, Rng& rng);

}  // namespace polypnet
