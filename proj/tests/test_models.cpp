#include <fstream>

#include "doctest.h"
#include "polypnet/augment.hpp"
#include "polypnet/errors.hpp"
#include "polypnet/models.hpp"
#include "polypnet/optimizer.hpp"
#include "polypnet/synthetic.hpp"
#include "polypnet/weights.hpp"
#include "test_util.hpp"

using namespace polypnet;

namespace {

std::vector<std::string> layer_kinds(const Network& net) {
  std::vector<std::string> kinds;
  for (std::size_t i = 0; i < net.layer_count(); ++i) kinds.push_back(net.layer(i).kind());
  return kinds;
}

ModelSpec simple_spec(int blocks, std::vector<double> dropout) {
  ModelSpec s;
  s.family = ModelFamily::simple_cnn;
  s.conv_blocks = blocks;
  s.dropout = std::move(dropout);
  return s;
}

}  // namespace

TEST_CASE("3CNN layer sequence matches the M1-1 shape") {
  Rng rng(1);
  Network net = build_simple_cnn(simple_spec(3, {}), rng);
  const std::vector<std::string> want{
      "conv2d", "relu", "maxpool2d",
      "conv2d", "relu", "maxpool2d",
      "conv2d", "relu", "maxpool2d",
      "flatten", "dense", "relu", "dense", "sigmoid_head"};
  CHECK(layer_kinds(net) == want);
}

TEST_CASE("4CNN with two 0.5 dropouts matches the M1-5 shape") {
  Rng rng(1);
  Network net = build_simple_cnn(simple_spec(4, {0.5, 0.5}), rng);
  const std::vector<std::string> want{
      "conv2d", "relu", "maxpool2d",
      "conv2d", "relu", "maxpool2d",
      "conv2d", "relu", "maxpool2d",
      "conv2d", "relu", "maxpool2d",
      "dropout",
      "flatten", "dense", "relu", "dropout", "dense", "sigmoid_head"};
  CHECK(layer_kinds(net) == want);
  CHECK(net.fingerprint().find("dropout(p=0.5)") != std::string::npos);
}

TEST_CASE("parameter count matches the closed-form sum") {
  // 4 blocks, base 16 doubling, 3x3 kernels, input 3x64x64, head 64:
  //   conv 448 + 4640 + 18496 + 73856, dense 2048*64+64, dense 64*1+1.
  Rng rng(1);
  Network net = build_simple_cnn(simple_spec(4, {}), rng);
  CHECK(net.parameter_count() == 228641);
}

TEST_CASE("every grid model builds at 3x64x64 and emits probabilities") {
  Rng data_rng(3);
  const Tensor x = rng_uniform(data_rng, {2, 3, 64, 64}, 0.0, 1.0);
  const auto grid = table1_model_grid();
  CHECK(grid.size() == 16);
  for (const auto& spec : grid) {
    Rng rng(7);
    Network net = build_model(spec, rng);
    const Tensor p = net.forward(x, Mode::eval);
    REQUIRE(p.shape() == std::vector<std::size_t>{2, 1});
    for (double v : p.flat()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("input too small for the pool cascade names the failing block") {
  ModelSpec s = simple_spec(4, {});
  s.input_shape = {3, 8, 8};  // 8 -> 4 -> 2 -> 1: block 4 cannot pool
  Rng rng(1);
  try {
    build_simple_cnn(s, rng);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("block 4") != std::string::npos);
  }
}

TEST_CASE("spec validation") {
  ModelSpec s = simple_spec(5, {});
  Rng rng(1);
  CHECK_THROWS_AS(build_simple_cnn(s, rng), ValueError);
  s = simple_spec(3, {0.3, 0.3, 0.3});
  CHECK_THROWS_AS(build_simple_cnn(s, rng), ValueError);
  s = simple_spec(3, {1.0});
  CHECK_THROWS_AS(build_simple_cnn(s, rng), ValueError);
  s = simple_spec(3, {});
  s.fine_tune = true;
  CHECK_THROWS_AS(s.validate(), ValueError);
}

TEST_CASE("frozen vgg backbone stays bit-identical while the head learns") {
  ModelSpec spec;
  spec.family = ModelFamily::vgg_feature_extractor;
  spec.base_width = 8;
  spec.head_width = 16;
  spec.input_shape = {3, 32, 32};

  SyntheticConfig scfg;
  scfg.count = 16;
  scfg.size = 32;
  const auto samples = make_blob_samples(scfg, 21);

  const auto train_steps = [&](bool fine_tune) {
    ModelSpec s = spec;
    s.fine_tune = fine_tune;
    Rng rng(5);
    Network net = build_vgg_feature_extractor(s, rng);
    const WeightContainer before = snapshot(net);

    Adam adam(net.trainable_slots());
    Rng drop(3);
    DataGenerator gen(samples, AugmentConfig{}, 8, Rng(4));
    for (int step = 0; step < 10; ++step) {
      const Batch b = gen.next();
      net.forward(b.images, Mode::train, &drop);
      net.backward(b.labels);
      adam.step();
    }
    const WeightContainer after = snapshot(net);

    bool backbone_changed = false, head_changed = false;
    for (std::size_t i = 0; i < before.tensors().size(); ++i) {
      const auto& a = before.tensors()[i];
      const auto& b2 = after.tensors()[i];
      bool same = true;
      for (std::size_t j = 0; j < a.value.size(); ++j) {
        if (a.value[j] != b2.value[j]) {
          same = false;
          break;
        }
      }
      // Backbone tensors are the conv ones; the head is dense.
      if (a.name.rfind("conv", 0) == 0) {
        backbone_changed = backbone_changed || !same;
      } else {
        head_changed = head_changed || !same;
      }
    }
    return std::pair{backbone_changed, head_changed};
  };

  const auto frozen = train_steps(false);
  CHECK_FALSE(frozen.first);
  CHECK(frozen.second);

  const auto tuned = train_steps(true);
  CHECK(tuned.first);
  CHECK(tuned.second);
}

TEST_CASE("frozen layers receive no optimizer state") {
  ModelSpec spec;
  spec.family = ModelFamily::vgg_feature_extractor;
  spec.base_width = 4;
  spec.head_width = 8;
  spec.input_shape = {1, 32, 32};
  Rng rng(2);
  Network net = build_vgg_feature_extractor(spec, rng);
  std::size_t conv_slots = 0;
  for (const auto& slot : net.trainable_slots()) {
    if (slot.name.rfind("conv", 0) == 0) ++conv_slots;
  }
  CHECK(conv_slots == 0);
}

TEST_CASE("weight container round-trip is byte-identical") {
  testutil::TempDir tmp("weights");
  Rng rng(11);
  Network net = build_simple_cnn(simple_spec(3, {0.3, 0.3}), rng);

  const auto p1 = tmp.path() / "a.pnw";
  const auto p2 = tmp.path() / "b.pnw";
  snapshot(net).save(p1);
  WeightContainer::load(p1).save(p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
}

TEST_CASE("save -> load -> forward is bit-identical") {
  testutil::TempDir tmp("weights2");
  Rng rng(13);
  ModelSpec spec = simple_spec(3, {0.3, 0.3});
  spec.input_shape = {3, 32, 32};
  spec.base_width = 4;
  Network net = build_simple_cnn(spec, rng);
  Rng data_rng(1);
  const Tensor x = rng_uniform(data_rng, {2, 3, 32, 32}, 0.0, 1.0);
  const Tensor before = net.forward(x, Mode::eval);

  const auto path = tmp.path() / "m.pnw";
  snapshot(net).save(path);
  Network restored = restore_network(WeightContainer::load(path));
  const Tensor after = restored.forward(x, Mode::eval);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
}

TEST_CASE("container lists exactly the 3CNN parameter tensors in layer order") {
  Rng rng(17);
  Network net = build_simple_cnn(simple_spec(3, {}), rng);
  const WeightContainer wc = snapshot(net);
  std::vector<std::string> names;
  for (const auto& nt : wc.tensors()) names.push_back(nt.name);
  const std::vector<std::string> want{
      "conv2d1.kernel", "conv2d1.bias", "conv2d2.kernel", "conv2d2.bias",
      "conv2d3.kernel", "conv2d3.bias", "dense1.weight",  "dense1.bias",
      "dense2.weight",  "dense2.bias"};
  CHECK(names == want);
}

TEST_CASE("corrupting a header byte is a format error, not a crash") {
  testutil::TempDir tmp("corrupt");
  Rng rng(19);
  ModelSpec spec = simple_spec(3, {});
  spec.base_width = 2;
  spec.head_width = 4;
  spec.input_shape = {1, 16, 16};
  Network net = build_simple_cnn(spec, rng);
  const auto path = tmp.path() / "m.pnw";
  snapshot(net).save(path);

  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(1);
  f.put('X');  // magic becomes PXW1
  f.close();
  CHECK_THROWS_AS(WeightContainer::load(path), FormatError);

  // Truncation is also a format error.
  const auto truncated = tmp.path() / "t.pnw";
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  bytes[1] = 'N';  // restore magic
  bytes.resize(bytes.size() / 2);
  std::ofstream out(truncated, std::ios::binary);
  out << bytes;
  out.close();
  CHECK_THROWS_AS(WeightContainer::load(truncated), FormatError);
}

TEST_CASE("loading into a mismatched architecture names the first bad tensor") {
  testutil::TempDir tmp("mismatch");
  Rng rng(23);
  ModelSpec a = simple_spec(3, {});
  a.base_width = 2;
  a.head_width = 4;
  a.input_shape = {1, 16, 16};
  Network net_a = build_simple_cnn(a, rng);
  const auto path = tmp.path() / "a.pnw";
  snapshot(net_a).save(path);

  ModelSpec b = a;
  b.base_width = 4;  // kernel shapes differ from the container's
  Network net_b = build_simple_cnn(b, rng);
  try {
    load_into(net_b, WeightContainer::load(path));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("conv2d1.kernel") != std::string::npos);
  }
}

TEST_CASE("vgg backbone weights load from a container") {
  testutil::TempDir tmp("backbone");
  ModelSpec spec;
  spec.family = ModelFamily::vgg_feature_extractor;
  spec.base_width = 4;
  spec.head_width = 8;
  spec.input_shape = {1, 32, 32};

  Rng rng(29);
  Network source = build_vgg_feature_extractor(spec, rng);
  // A backbone container holds only the conv tensors, in layer order.
  std::vector<NamedTensor> conv_tensors;
  auto& src = source;
  for (const auto& slot : src.param_slots()) {
    if (slot.name.rfind("conv", 0) == 0) conv_tensors.push_back({slot.name, *slot.value});
  }
  const WeightContainer backbone(source.fingerprint(), std::move(conv_tensors));

  Rng rng2(31);
  Network loaded = build_vgg_feature_extractor(spec, rng2, &backbone);
  for (const auto& slot : loaded.param_slots()) {
    if (slot.name.rfind("conv", 0) != 0) continue;
    bool found = false;
    for (const auto& nt : backbone.tensors()) {
      if (nt.name == slot.name) {
        found = true;
        for (std::size_t i = 0; i < nt.value.size(); ++i) REQUIRE((*slot.value)[i] == nt.value[i]);
      }
    }
    REQUIRE(found);
  }

  // Mismatched container: different base width.
  ModelSpec other = spec;
  other.base_width = 8;
  Rng rng3(33);
  CHECK_THROWS_AS(build_vgg_feature_extractor(other, rng3, &backbone), FormatError);
}

TEST_CASE("model descriptions match the grid vocabulary") {
  CHECK(model_description(simple_spec(3, {})) == "3CNN");
  CHECK(model_description(simple_spec(4, {0.5, 0.5})) == "4CNN");
  ModelSpec aug = simple_spec(4, {});
  aug.augment = true;
  CHECK(model_description(aug) == "Augment");
  ModelSpec vgg;
  vgg.family = ModelFamily::vgg_feature_extractor;
  CHECK(model_description(vgg) == "");
  vgg.augment = true;
  CHECK(model_description(vgg) == "Augment");
  vgg.fine_tune = true;
  CHECK(model_description(vgg) == "Fine Tune Augment");
}

TEST_CASE("softmax2 head is available as a config alternative") {
  ModelSpec spec = simple_spec(3, {});
  spec.head = HeadKind::softmax2;
  spec.base_width = 2;
  spec.head_width = 4;
  spec.input_shape = {1, 16, 16};
  Rng rng(37);
  Network net = build_simple_cnn(spec, rng);
  Rng data_rng(1);
  const Tensor x = rng_uniform(data_rng, {3, 1, 16, 16}, 0.0, 1.0);
  const Tensor p = net.forward(x, Mode::eval);
  REQUIRE(p.shape() == std::vector<std::size_t>{3, 1});
  for (double v : p.flat()) CHECK((v > 0.0 && v < 1.0));
}
