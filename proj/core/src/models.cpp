#include "polypnet/models.hpp"

#include <cmath>

#include "polypnet/errors.hpp"

namespace polypnet {

void ModelSpec::validate() const {
  if (family == ModelFamily::simple_cnn && conv_blocks != 3 && conv_blocks != 4) {
    throw ValueError("simple_cnn supports 3 or 4 conv blocks, got " + std::to_string(conv_blocks));
  }
  if (dropout.size() > 2) throw ValueError("at most two dropout rates are supported");
  for (double p : dropout) {
    if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout rates must be in [0,1)");
  }
  if (fine_tune && family != ModelFamily::vgg_feature_extractor) {
    throw ValueError("fine_tune applies to the vgg_feature_extractor family only");
  }
  if (base_width == 0 || head_width == 0) throw ValueError("widths must be positive");
}

void glorot_init(Network& net, Rng& rng) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Layer& layer = net.layer(i);
    if (auto* conv = dynamic_cast<Conv2d*>(&layer)) {
      const auto& ks = conv->kernel().shape();  // [F,C,kh,kw]
      const double fan_in = static_cast<double>(ks[1] * ks[2] * ks[3]);
      const double fan_out = static_cast<double>(ks[0] * ks[2] * ks[3]);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      conv->kernel() = rng_uniform(rng, ks, -limit, limit);
    } else if (auto* dense = dynamic_cast<Dense*>(&layer)) {
      const auto& ws = dense->weight().shape();  // [in,out]
      const double limit =
          std::sqrt(6.0 / (static_cast<double>(ws[0]) + static_cast<double>(ws[1])));
      dense->weight() = rng_uniform(rng, ws, -limit, limit);
    }
  }
}

namespace {

void append_head(std::vector<std::unique_ptr<Layer>>& layers, std::size_t feat,
                 const ModelSpec& spec) {
  layers.push_back(std::make_unique<Flatten>());
  layers.push_back(std::make_unique<Dense>(feat, spec.head_width));
  layers.push_back(std::make_unique<Relu>());
  if (spec.dropout.size() >= 2) {
    layers.push_back(std::make_unique<Dropout>(spec.dropout[1]));
  } else if (spec.dropout.size() == 1) {
    // A single rate sits at the canonical position after the hidden dense.
    layers.push_back(std::make_unique<Dropout>(spec.dropout[0]));
  }
  if (spec.head == HeadKind::sigmoid) {
    layers.push_back(std::make_unique<Dense>(spec.head_width, 1));
    layers.push_back(std::make_unique<SigmoidBceHead>());
  } else {
    layers.push_back(std::make_unique<Dense>(spec.head_width, 2));
    layers.push_back(std::make_unique<Softmax2Head>());
  }
}

struct StackResult {
  std::vector<std::unique_ptr<Layer>> layers;
  std::size_t channels, h, w;
  std::size_t conv_layer_count;  // layers making up the backbone (vgg freeze span)
};

StackResult conv_stack(const ModelSpec& spec, const std::vector<std::vector<std::size_t>>& blocks) {
  StackResult r;
  r.channels = spec.input_shape[0];
  r.h = spec.input_shape[1];
  r.w = spec.input_shape[2];
  for (const auto& widths : blocks) {
    for (std::size_t width : widths) {
      r.layers.push_back(std::make_unique<Conv2d>(width, r.channels, 3, 3, 1, 1));
      r.layers.push_back(std::make_unique<Relu>());
      r.channels = width;
    }
    if (r.h < 2 || r.w < 2 || r.h % 2 != 0 || r.w % 2 != 0) {
      throw ShapeError(spec.name + ": input " + std::to_string(spec.input_shape[1]) + "x" +
                       std::to_string(spec.input_shape[2]) + " cannot feed block " +
                       std::to_string(&widths - blocks.data() + 1) + "'s 2x2 pool (extent " +
                       std::to_string(r.h) + "x" + std::to_string(r.w) + ")");
    }
    r.layers.push_back(std::make_unique<MaxPool2d>(2, 2, 2));
    r.h /= 2;
    r.w /= 2;
  }
  r.conv_layer_count = r.layers.size();
  return r;
}

}  // namespace

Network build_simple_cnn(const ModelSpec& spec, Rng& init_rng) {
  spec.validate();
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t width = spec.base_width;
  for (int b = 0; b < spec.conv_blocks; ++b) {
    blocks.push_back({width});
    width *= 2;
  }
  auto stack = conv_stack(spec, blocks);
  auto layers = std::move(stack.layers);
  if (spec.dropout.size() >= 2) {
    layers.push_back(std::make_unique<Dropout>(spec.dropout[0]));
  }
  append_head(layers, stack.channels * stack.h * stack.w, spec);

  Network net({spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]}, std::move(layers));
  glorot_init(net, init_rng);
  return net;
}

Network build_vgg_feature_extractor(const ModelSpec& spec, Rng& init_rng,
                                    const WeightContainer* backbone) {
  spec.validate();
  // Block layout: conv counts per block x widths, pools between blocks.
  std::vector<std::vector<std::size_t>> blocks;
  if (spec.vgg_depth == VggDepth::vgg19) {
    blocks = {{64, 64},
              {128, 128},
              {256, 256, 256, 256},
              {512, 512, 512, 512},
              {512, 512, 512, 512}};
  } else {
    // 8-conv scaled-down stack; widths follow base_width (default 16).
    const std::size_t b = spec.base_width;
    blocks = {{b}, {2 * b}, {4 * b, 4 * b}, {8 * b, 8 * b}, {8 * b, 8 * b}};
  }
  auto stack = conv_stack(spec, blocks);
  auto layers = std::move(stack.layers);
  const std::size_t backbone_layers = stack.conv_layer_count;
  if (spec.dropout.size() >= 2) {
    layers.push_back(std::make_unique<Dropout>(spec.dropout[0]));
  }
  append_head(layers, stack.channels * stack.h * stack.w, spec);

  Network net({spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]}, std::move(layers));
  glorot_init(net, init_rng);

  if (backbone != nullptr) {
    // The container carries the conv-stack tensors of a matching backbone;
    // load by name/shape into the stack prefix.
    auto slots = net.param_slots();
    std::size_t si = 0;
    for (const auto& nt : backbone->tensors()) {
      if (si >= slots.size()) throw FormatError("backbone container has surplus tensor " + nt.name);
      if (nt.name != slots[si].name || !nt.value.same_shape(*slots[si].value)) {
        throw FormatError("weight/architecture mismatch at tensor " + nt.name +
                          " (expected " + slots[si].name + " " +
                          shape_to_string(slots[si].value->shape()) + ")");
      }
      *slots[si].value = nt.value;
      ++si;
    }
  }
  if (!spec.fine_tune) {
    for (std::size_t i = 0; i < backbone_layers; ++i) net.set_trainable(i, false);
  }
  return net;
}

Network build_model(const ModelSpec& spec, Rng& init_rng, const WeightContainer* backbone) {
  return spec.family == ModelFamily::simple_cnn
             ? build_simple_cnn(spec, init_rng)
             : build_vgg_feature_extractor(spec, init_rng, backbone);
}

std::string model_description(const ModelSpec& spec) {
  if (spec.family == ModelFamily::simple_cnn) {
    std::string d = std::to_string(spec.conv_blocks) + "CNN";
    if (spec.augment) d = "Augment";
    return d;
  }
  if (spec.fine_tune) return "Fine Tune Augment";
  return spec.augment ? "Augment" : "";
}

std::vector<ModelSpec> table1_model_grid(std::array<std::size_t, 3> input_shape) {
  auto simple = [&](std::string name, int blocks, std::vector<double> drop, bool aug) {
    ModelSpec s;
    s.name = std::move(name);
    s.family = ModelFamily::simple_cnn;
    s.conv_blocks = blocks;
    s.dropout = std::move(drop);
    s.augment = aug;
    s.input_shape = input_shape;
    return s;
  };
  auto vgg = [&](std::string name, std::vector<double> drop, bool aug, bool ft) {
    ModelSpec s;
    s.name = std::move(name);
    s.family = ModelFamily::vgg_feature_extractor;
    s.dropout = std::move(drop);
    s.augment = aug;
    s.fine_tune = ft;
    s.input_shape = input_shape;
    return s;
  };
  return {
      simple("M1-1", 3, {}, false),
      simple("M1-2", 4, {}, false),
      simple("M1-3", 4, {0.3, 0.3}, false),
      simple("M1-4", 4, {0.3, 0.3}, false),
      simple("M1-5", 4, {0.5, 0.5}, false),
      simple("M2-1", 4, {}, true),
      simple("M2-2", 4, {0.3, 0.3}, true),
      simple("M2-3", 4, {0.5, 0.5}, true),
      vgg("M3-4", {0.3, 0.3}, false, false),
      vgg("M3-5", {}, true, false),
      vgg("M3-6", {0.5, 0.5}, true, false),
      vgg("M3-7", {}, true, false),
      vgg("M3-8", {}, true, true),
      vgg("M3-9", {0.3, 0.3}, true, true),
      vgg("M3-10", {0.5, 0.5}, true, true),
      vgg("M3-11", {}, true, true),
  };
}

}  // namespace polypnet
