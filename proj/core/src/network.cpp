#include "polypnet/network.hpp"

#include <map>

#include "polypnet/errors.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

Network::Network(std::vector<std::size_t> input_shape, std::vector<std::unique_ptr<Layer>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ValueError("network needs at least one layer");
  trainable_.assign(layers_.size(), true);

  std::vector<std::size_t> shape = input_shape_;
  fingerprint_ = "pnw1|in:";
  for (std::size_t i = 0; i < input_shape_.size(); ++i) {
    if (i) fingerprint_ += "x";
    fingerprint_ += std::to_string(input_shape_[i]);
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i]->is_head() && i + 1 != layers_.size()) {
      throw ShapeError("head layer must be last in the stack");
    }
    try {
      shape = layers_[i]->output_shape(shape);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + layers_[i]->kind() +
                       "): " + e.what());
    }
    fingerprint_ += "|" + layers_[i]->fingerprint();
  }
}

Tensor Network::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (x.rank() != input_shape_.size() + 1) {
    throw ShapeError("forward input rank " + std::to_string(x.rank()) + " != batch + " +
                     shape_to_string(input_shape_));
  }
  for (std::size_t i = 0; i < input_shape_.size(); ++i) {
    if (x.shape()[i + 1] != input_shape_[i]) {
      throw ShapeError("forward input " + shape_to_string(x.shape()) +
                       " does not match declared input " + shape_to_string(input_shape_));
    }
  }
  Tensor out = x;
  for (auto& layer : layers_) out = layer->forward(out, mode, rng);
  return out;
}

double Network::loss(const Tensor& labels) const {
  const auto* head = dynamic_cast<const HeadLayer*>(layers_.back().get());
  if (head == nullptr) throw ValueError("network has no classification head");
  return head->loss(labels);
}

void Network::backward(const Tensor& labels) {
  auto* head = dynamic_cast<HeadLayer*>(layers_.back().get());
  if (head == nullptr) throw ValueError("network has no classification head");
  Tensor grad = head->loss_grad(labels);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) {
    grad = layers_[i]->backward(grad, trainable_[i]);
  }
}

void Network::set_trainable(std::size_t layer_index, bool trainable) {
  trainable_.at(layer_index) = trainable;
}

std::vector<Network::ParamSlot> Network::param_slots() {
  std::vector<ParamSlot> slots;
  std::map<std::string, std::size_t> ordinal;
  for (auto& layer : layers_) {
    const auto params = layer->params();
    if (params.empty()) continue;
    const std::size_t n = ++ordinal[layer->kind()];
    const auto grads = layer->grads();
    const auto names = layer->param_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots.push_back({layer->kind() + std::to_string(n) + "." + names[i], params[i], grads[i]});
    }
  }
  return slots;
}

std::vector<Network::ParamSlot> Network::trainable_slots() {
  std::vector<ParamSlot> slots;
  std::map<std::string, std::size_t> ordinal;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    auto& layer = *layers_[li];
    const auto params = layer.params();
    if (params.empty()) continue;
    const std::size_t n = ++ordinal[layer.kind()];
    if (!trainable_[li]) continue;
    const auto grads = layer.grads();
    const auto names = layer.param_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots.push_back({layer.kind() + std::to_string(n) + "." + names[i], params[i], grads[i]});
    }
  }
  return slots;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    for (const Tensor* p : const_cast<Layer&>(*layer).params()) n += p->size();
  }
  return n;
}

bool Network::has_head() const { return layers_.back()->is_head(); }

// ------------------------------------------------------------- fingerprint

namespace {

struct Token {
  std::string name;
  std::map<std::string, std::string> args;
};

Token parse_token(const std::string& tok) {
  Token t;
  const auto open = tok.find('(');
  if (open == std::string::npos) {
    t.name = tok;
    return t;
  }
  if (tok.back() != ')') throw FormatError("bad fingerprint token: " + tok);
  t.name = tok.substr(0, open);
  for (const auto& kv : split(tok.substr(open + 1, tok.size() - open - 2), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("bad fingerprint argument: " + kv);
    t.args[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return t;
}

std::size_t arg_size(const Token& t, const std::string& key) {
  const auto it = t.args.find(key);
  if (it == t.args.end()) throw FormatError("fingerprint " + t.name + " missing " + key);
  return static_cast<std::size_t>(parse_double(it->second));
}

std::pair<std::size_t, std::size_t> arg_pair(const Token& t, const std::string& key) {
  const auto it = t.args.find(key);
  if (it == t.args.end()) throw FormatError("fingerprint " + t.name + " missing " + key);
  const auto parts = split(it->second, 'x');
  if (parts.size() != 2) throw FormatError("fingerprint " + t.name + ": bad pair " + it->second);
  return {static_cast<std::size_t>(parse_double(parts[0])),
          static_cast<std::size_t>(parse_double(parts[1]))};
}

}  // namespace

Network network_from_fingerprint(const std::string& fingerprint) {
  const auto tokens = split(fingerprint, '|');
  if (tokens.size() < 3 || tokens[0] != "pnw1") {
    throw FormatError("unrecognized fingerprint: " + fingerprint);
  }
  if (tokens[1].rfind("in:", 0) != 0) {
    throw FormatError("fingerprint missing input shape: " + fingerprint);
  }
  std::vector<std::size_t> input_shape;
  for (const auto& e : split(tokens[1].substr(3), 'x')) {
    input_shape.push_back(static_cast<std::size_t>(parse_double(e)));
  }

  std::vector<std::unique_ptr<Layer>> layers;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const Token t = parse_token(tokens[i]);
    if (t.name == "conv2d") {
      const auto [kh, kw] = arg_pair(t, "k");
      layers.push_back(std::make_unique<Conv2d>(arg_size(t, "f"), arg_size(t, "c"), kh, kw,
                                                arg_size(t, "s"), arg_size(t, "p")));
    } else if (t.name == "relu") {
      layers.push_back(std::make_unique<Relu>());
    } else if (t.name == "maxpool2d") {
      const auto [kh, kw] = arg_pair(t, "k");
      layers.push_back(std::make_unique<MaxPool2d>(kh, kw, arg_size(t, "s")));
    } else if (t.name == "flatten") {
      layers.push_back(std::make_unique<Flatten>());
    } else if (t.name == "dense") {
      layers.push_back(std::make_unique<Dense>(arg_size(t, "in"), arg_size(t, "out")));
    } else if (t.name == "dropout") {
      const auto it = t.args.find("p");
      if (it == t.args.end()) throw FormatError("dropout fingerprint missing rate");
      layers.push_back(std::make_unique<Dropout>(parse_double(it->second)));
    } else if (t.name == "sigmoid_head") {
      layers.push_back(std::make_unique<SigmoidBceHead>());
    } else if (t.name == "softmax2_head") {
      layers.push_back(std::make_unique<Softmax2Head>());
    } else {
      throw FormatError("unknown layer in fingerprint: " + t.name);
    }
  }
  return Network(std::move(input_shape), std::move(layers));
}

}  // namespace polypnet
