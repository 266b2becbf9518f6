#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"
#include "ntmlab/tensor.hpp"

namespace ntmlab {

/// Ordered collection of named trainable tensors. Registration order is
/// fixed at model construction and defines the checkpoint layout.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor value);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t total_scalars() const;

  /// FNV-1a over all parameter bytes, for purity checks.
  std::uint64_t checksum() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-tape leaf handles for every parameter in a store.
class Bindings {
 public:
  Var at(const std::string& name) const;
  bool has(const std::string& name) const { return vars_.count(name) != 0; }

 private:
  friend Bindings bind(Tape& tape, const ParameterStore& store);
  std::unordered_map<std::string, Var> vars_;
};

/// Registers every parameter as a named leaf on the tape.
Bindings bind(Tape& tape, const ParameterStore& store);

/// Weight-matrix initializer: uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
Tensor uniform_fanin_init(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace ntmlab
