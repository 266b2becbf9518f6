#include "ntmlab/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ntmlab {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (has(name)) throw std::logic_error("ParameterStore: duplicate name " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

Tensor& ParameterStore::value(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("ParameterStore: unknown parameter " + name);
  }
  return values_[it->second];
}

const Tensor& ParameterStore::value(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("ParameterStore: unknown parameter " + name);
  }
  return values_[it->second];
}

std::size_t ParameterStore::total_scalars() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::uint64_t ParameterStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t bytes) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < names_.size(); ++i) {
    mix(names_[i].data(), names_[i].size());
    mix(values_[i].data(), values_[i].size() * sizeof(double));
  }
  return h;
}

Var Bindings::at(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw std::out_of_range("Bindings: unbound parameter " + name);
  }
  return it->second;
}

Bindings bind(Tape& tape, const ParameterStore& store) {
  Bindings b;
  for (const std::string& name : store.names()) {
    b.vars_[name] = tape.param(name, store.value(name));
  }
  return b;
}

Tensor uniform_fanin_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = (2.0 * rng.uniform01() - 1.0) * bound;
  }
  return t;
}

}  // namespace ntmlab
