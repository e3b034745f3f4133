#include "polypnet/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "polypnet/errors.hpp"

namespace polypnet {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'W', '1'};
constexpr std::uint32_t kMaxNameLen = 4096;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ULL << 32;

static_assert(std::endian::native == std::endian::little,
              "the PNW1 codec below assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t get_u32(std::ifstream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (in.gcount() != 4) throw FormatError(std::string("truncated weight file reading ") + what);
  return v;
}

std::uint64_t get_u64(std::ifstream& in, const char* what) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (in.gcount() != 8) throw FormatError(std::string("truncated weight file reading ") + what);
  return v;
}

}  // namespace

WeightContainer::WeightContainer(std::string fingerprint, std::vector<NamedTensor> tensors)
    : fingerprint_(std::move(fingerprint)), tensors_(std::move(tensors)) {}

void WeightContainer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(fingerprint_.size()));
  out.write(fingerprint_.data(), static_cast<std::streamsize>(fingerprint_.size()));
  for (const auto& nt : tensors_) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put_u32(out, static_cast<std::uint32_t>(nt.value.rank()));
    for (std::size_t e : nt.value.shape()) put_u64(out, e);
    out.write(reinterpret_cast<const char*>(nt.value.data()),
              static_cast<std::streamsize>(nt.value.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

WeightContainer WeightContainer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a PNW1 weight container");
  }
  const std::uint32_t fp_len = get_u32(in, "fingerprint length");
  if (fp_len > kMaxNameLen) throw FormatError("implausible fingerprint length");
  std::string fingerprint(fp_len, '\0');
  in.read(fingerprint.data(), fp_len);
  if (in.gcount() != static_cast<std::streamsize>(fp_len)) {
    throw FormatError("truncated weight file reading fingerprint");
  }
  if (fingerprint.rfind("pnw1|", 0) != 0) {
    throw FormatError("corrupt fingerprint in " + path.string());
  }

  std::vector<NamedTensor> tensors;
  while (true) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    if (in.gcount() == 0) break;  // clean EOF between records
    if (in.gcount() != 4) throw FormatError("truncated weight file reading tensor name length");
    if (name_len == 0 || name_len > kMaxNameLen) throw FormatError("implausible tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw FormatError("truncated weight file reading tensor name");
    }
    const std::uint32_t rank = get_u32(in, "tensor rank");
    if (rank > kMaxRank) throw FormatError("implausible tensor rank for " + name);
    std::vector<std::size_t> shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      e = get_u64(in, "tensor extent");
      if (e == 0) throw FormatError("zero extent for " + name);
      count *= e;
      if (count > kMaxElements) throw FormatError("implausible tensor size for " + name);
    }
    std::vector<double> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
      throw FormatError("truncated weight file reading values of " + name);
    }
    tensors.push_back({std::move(name), unchecked_tensor(std::move(shape), std::move(data))});
  }
  return WeightContainer(std::move(fingerprint), std::move(tensors));
}

WeightContainer snapshot(const Network& net) {
  auto& mutable_net = const_cast<Network&>(net);
  std::vector<NamedTensor> tensors;
  for (const auto& slot : mutable_net.param_slots()) {
    tensors.push_back({slot.name, *slot.value});
  }
  return WeightContainer(net.fingerprint(), std::move(tensors));
}

void load_into(Network& net, const WeightContainer& weights) {
  const auto slots = net.param_slots();
  if (weights.fingerprint() != net.fingerprint()) {
    // Name the first divergent tensor when possible; architectures can share
    // a prefix, and the concrete tensor is the useful diagnostic.
    const auto& ts = weights.tensors();
    for (std::size_t i = 0; i < std::min(ts.size(), slots.size()); ++i) {
      if (ts[i].name != slots[i].name || !ts[i].value.same_shape(*slots[i].value)) {
        throw FormatError("weight/architecture mismatch at tensor " + ts[i].name +
                          " (network expects " + slots[i].name + " " +
                          shape_to_string(slots[i].value->shape()) + ")");
      }
    }
    throw FormatError("weight container fingerprint does not match network: " +
                      weights.fingerprint() + " vs " + net.fingerprint());
  }
  if (weights.tensors().size() != slots.size()) {
    throw FormatError("weight container holds " + std::to_string(weights.tensors().size()) +
                      " tensors, network has " + std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& nt = weights.tensors()[i];
    if (nt.name != slots[i].name || !nt.value.same_shape(*slots[i].value)) {
      throw FormatError("weight/architecture mismatch at tensor " + nt.name);
    }
    *slots[i].value = nt.value;
  }
}

Network restore_network(const WeightContainer& weights) {
  Network net = network_from_fingerprint(weights.fingerprint());
  load_into(net, weights);
  return net;
}

}  // namespace polypnet
