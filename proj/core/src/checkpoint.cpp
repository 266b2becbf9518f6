#include "ntmlab/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace ntmlab {

namespace {

constexpr char kMagic[8] = {'N', 'T', 'M', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("checkpoint: truncated file");
  return value;
}

void write_name(std::ostream& out, const std::string& name) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string read_name(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 20)) throw CheckpointError("checkpoint: implausible name length");
  std::string name(len, '\0');
  in.read(name.data(), len);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  return name;
}

}  // namespace

std::string Checkpoint::spec_echo() const {
  auto it = strings.find("spec");
  return it == strings.end() ? std::string() : it->second;
}

std::size_t Checkpoint::step() const {
  auto it = tensors.find("train/step");
  if (it == tensors.end()) throw CheckpointError("checkpoint: missing train/step");
  return static_cast<std::size_t>(it->second[0]);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, ckpt.version);
    write_pod<std::uint64_t>(out, ckpt.tensors.size() + ckpt.strings.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
      write_pod<std::uint8_t>(out, 0);
      write_name(out, name);
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
      for (std::size_t d = 0; d < tensor.rank(); ++d) {
        write_pod<std::uint64_t>(out, tensor.dim(d));
      }
      out.write(reinterpret_cast<const char*>(tensor.data()),
                static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    for (const auto& [name, text] : ckpt.strings) {
      write_pod<std::uint8_t>(out, 1);
      write_name(out, name);
      write_pod<std::uint64_t>(out, text.size());
      out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);

  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw CheckpointError("checkpoint: bad magic in " + path);
  }
  Checkpoint ckpt;
  ckpt.version = read_pod<std::uint32_t>(in);
  if (ckpt.version != kVersion) {
    throw CheckpointError("checkpoint: version " + std::to_string(ckpt.version) +
                          " is not supported (expected " +
                          std::to_string(kVersion) + ")");
  }
  const auto records = read_pod<std::uint64_t>(in);
  for (std::uint64_t r = 0; r < records; ++r) {
    const auto kind = read_pod<std::uint8_t>(in);
    std::string name = read_name(in);
    if (kind == 0) {
      const auto rank = read_pod<std::uint32_t>(in);
      if (rank > 8) throw CheckpointError("checkpoint: implausible tensor rank");
      Shape shape(rank);
      for (auto& d : shape) d = read_pod<std::uint64_t>(in);
      Tensor tensor(shape);
      in.read(reinterpret_cast<char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
      if (!in) throw CheckpointError("checkpoint: truncated tensor " + name);
      ckpt.tensors.emplace(std::move(name), std::move(tensor));
    } else if (kind == 1) {
      const auto len = read_pod<std::uint64_t>(in);
      if (len > (1u << 26)) throw CheckpointError("checkpoint: implausible string");
      std::string text(len, '\0');
      in.read(text.data(), static_cast<std::streamsize>(len));
      if (!in) throw CheckpointError("checkpoint: truncated string " + name);
      ckpt.strings.emplace(std::move(name), std::move(text));
    } else {
      throw CheckpointError("checkpoint: unknown record kind");
    }
  }
  return ckpt;
}

Checkpoint make_checkpoint(const std::string& spec_echo, const Model& model,
                           const TrainerState& state) {
  Checkpoint ckpt;
  ckpt.strings["spec"] = spec_echo;
  ckpt.strings["rng/train"] = state.train_stream.serialize();
  ckpt.strings["rng/val"] = state.val_stream.serialize();
  ckpt.tensors["train/step"] = Tensor::scalar(static_cast<double>(state.step));
  ckpt.tensors["adam/t"] = Tensor::scalar(static_cast<double>(state.adam.t()));
  const ParameterStore& store = model.params();
  for (const std::string& name : store.names()) {
    ckpt.tensors["param/" + name] = store.value(name);
    ckpt.tensors["adam/m/" + name] = state.adam.m(name);
    ckpt.tensors["adam/v/" + name] = state.adam.v(name);
  }
  return ckpt;
}

TrainerState apply_checkpoint(const Checkpoint& ckpt, Model& model) {
  ParameterStore& store = model.params();
  std::map<std::string, Tensor> m, v;
  for (const std::string& name : store.names()) {
    auto it = ckpt.tensors.find("param/" + name);
    if (it == ckpt.tensors.end()) {
      throw CheckpointError("checkpoint: missing parameter " + name);
    }
    if (it->second.shape() != store.value(name).shape()) {
      throw CheckpointError("checkpoint: shape mismatch for " + name + ": " +
                            shape_str(it->second.shape()) + " vs " +
                            shape_str(store.value(name).shape()));
    }
    store.value(name) = it->second;
    m[name] = ckpt.tensors.at("adam/m/" + name);
    v[name] = ckpt.tensors.at("adam/v/" + name);
  }

  TrainerState state;
  state.step = ckpt.step();
  state.adam = AdamState(store);
  state.adam.restore(static_cast<std::size_t>(ckpt.tensors.at("adam/t")[0]),
                     std::move(m), std::move(v));
  state.train_stream = Rng::deserialize(ckpt.strings.at("rng/train"));
  state.val_stream = Rng::deserialize(ckpt.strings.at("rng/val"));
  return state;
}

}  // namespace ntmlab
