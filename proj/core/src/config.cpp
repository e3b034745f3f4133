#include "polypnet/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "polypnet/errors.hpp"

namespace polypnet {

namespace {

using Json = nlohmann::ordered_json;

void require_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw FormatError("config: unknown field '" + key + "' in " + where);
    }
  }
}

void parse_dataset(const Json& j, DatasetConfig& d) {
  require_keys(j, "dataset",
               {"root", "manifest", "channels", "input_size", "seed", "crop_size",
                "normals_per_image", "margin_frac", "stratified"});
  d.root = j.value("root", d.root);
  d.manifest = j.value("manifest", d.manifest);
  d.channels = j.value("channels", d.channels);
  if (j.contains("input_size")) {
    const auto& s = j.at("input_size");
    if (!s.is_array() || s.size() != 2) throw FormatError("config: input_size must be [H,W]");
    d.input_h = s.at(0).get<std::size_t>();
    d.input_w = s.at(1).get<std::size_t>();
  }
  d.seed = j.value("seed", d.seed);
  d.crop.crop_size = j.value("crop_size", d.crop.crop_size);
  d.crop.normals_per_image = j.value("normals_per_image", d.crop.normals_per_image);
  d.crop.margin_frac = j.value("margin_frac", d.crop.margin_frac);
  d.stratified = j.value("stratified", d.stratified);
  d.crop.out_h = d.input_h;
  d.crop.out_w = d.input_w;
}

void parse_augment(const Json& j, AugmentConfig& a) {
  require_keys(j, "augment",
               {"horizontal_flip", "vertical_flip", "rotation_max_deg", "shift_max_frac",
                "zoom_range", "fill_mode"});
  a.horizontal_flip = j.value("horizontal_flip", a.horizontal_flip);
  a.vertical_flip = j.value("vertical_flip", a.vertical_flip);
  a.rotation_max_deg = j.value("rotation_max_deg", a.rotation_max_deg);
  a.shift_max_frac = j.value("shift_max_frac", a.shift_max_frac);
  if (j.contains("zoom_range")) {
    const auto& z = j.at("zoom_range");
    if (!z.is_array() || z.size() != 2) throw FormatError("config: zoom_range must be [lo,hi]");
    a.zoom_range = {z.at(0).get<double>(), z.at(1).get<double>()};
  }
  if (j.contains("fill_mode")) {
    const std::string f = j.at("fill_mode").get<std::string>();
    if (f == "reflect") {
      a.fill_mode = FillMode::reflect;
    } else if (f == "constant0") {
      a.fill_mode = FillMode::constant0;
    } else {
      throw FormatError("config: fill_mode must be reflect or constant0, got " + f);
    }
  }
  a.validate();
}

void parse_train(const Json& j, TrainConfig& t) {
  require_keys(j, "train", {"max_epochs", "patience", "batch_size", "seed", "adam"});
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    require_keys(a, "train.adam", {"lr", "beta1", "beta2", "epsilon"});
    t.adam.lr = a.value("lr", t.adam.lr);
    t.adam.beta1 = a.value("beta1", t.adam.beta1);
    t.adam.beta2 = a.value("beta2", t.adam.beta2);
    t.adam.epsilon = a.value("epsilon", t.adam.epsilon);
  }
}

ModelSpec parse_model(const std::string& name, const Json& j, const DatasetConfig& d) {
  require_keys(j, "models." + name,
               {"family", "conv_blocks", "base_width", "head_width", "dropout", "augment",
                "fine_tune", "vgg_depth", "head", "backbone_weights"});
  ModelSpec s;
  s.name = name;
  const std::string family = j.value("family", std::string("simple_cnn"));
  if (family == "simple_cnn") {
    s.family = ModelFamily::simple_cnn;
  } else if (family == "vgg_feature_extractor") {
    s.family = ModelFamily::vgg_feature_extractor;
  } else {
    throw FormatError("config: unknown model family '" + family + "' for " + name);
  }
  s.conv_blocks = j.value("conv_blocks", s.conv_blocks);
  s.base_width = j.value("base_width", s.base_width);
  s.head_width = j.value("head_width", s.head_width);
  if (j.contains("dropout")) {
    s.dropout = j.at("dropout").get<std::vector<double>>();
  }
  s.augment = j.value("augment", s.augment);
  s.fine_tune = j.value("fine_tune", s.fine_tune);
  if (j.contains("vgg_depth")) {
    const std::string v = j.at("vgg_depth").get<std::string>();
    if (v == "mini") {
      s.vgg_depth = VggDepth::mini;
    } else if (v == "vgg19") {
      s.vgg_depth = VggDepth::vgg19;
    } else {
      throw FormatError("config: vgg_depth must be mini or vgg19, got " + v);
    }
  }
  if (j.contains("head")) {
    const std::string h = j.at("head").get<std::string>();
    if (h == "sigmoid") {
      s.head = HeadKind::sigmoid;
    } else if (h == "softmax2") {
      s.head = HeadKind::softmax2;
    } else {
      throw FormatError("config: head must be sigmoid or softmax2, got " + h);
    }
  }
  if (j.contains("backbone_weights")) {
    s.backbone_weights = j.at("backbone_weights").get<std::string>();
  }
  s.input_shape = {d.channels, d.input_h, d.input_w};
  s.validate();
  return s;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }

  ExperimentConfig cfg;
  try {
    require_keys(j, "top level", {"dataset", "augment", "train", "output_root", "models"});
    if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
    if (j.contains("augment")) parse_augment(j.at("augment"), cfg.augment);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    cfg.output_root = j.value("output_root", cfg.output_root);
    if (j.contains("models")) {
      for (const auto& [name, block] : j.at("models").items()) {
        cfg.models.push_back(parse_model(name, block, cfg.dataset));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  } catch (const ValueError& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace polypnet
