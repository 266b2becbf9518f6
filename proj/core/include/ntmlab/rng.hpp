#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ntmlab {

/// Seeded random stream. All distributions are hand-rolled on top of the
/// raw mt19937_64 output so that byte-identical sequences do not depend on
/// standard-library distribution internals. State round-trips through
/// serialize()/deserialize() for checkpointing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi], inclusive, rejection-sampled (no modulo bias).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  /// Fair coin as 0.0 or 1.0.
  double bernoulli_bit() { return (next_u64() >> 63) ? 1.0 : 0.0; }

  /// Box-Muller without the cached spare draw (keeps state = engine state).
  double normal(double mean, double sd);

  /// Normal draw redrawn until within mean +/- num_sd * sd.
  double truncated_normal(double mean, double sd, double num_sd);

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Derives independent stream seeds from a base seed (splitmix64 step).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ntmlab
