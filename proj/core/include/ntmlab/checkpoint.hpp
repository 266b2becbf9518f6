#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ntmlab/model.hpp"
#include "ntmlab/tensor.hpp"
#include "ntmlab/training.hpp"

namespace ntmlab {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

/// On-disk format: magic "NTMLABCK", version u32, record count u64, then
/// length-prefixed records. Each record is a kind byte (0 = f64 tensor,
/// 1 = utf-8 string), a u32-length name, and the payload (tensor: u32 rank,
/// u64 dims, raw f64 values; string: u64 length, bytes). Everything is
/// little-endian and doubles are stored bit-exactly.
struct Checkpoint {
  std::uint32_t version = 1;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> strings;

  std::string spec_echo() const;
  std::size_t step() const;
};

/// Atomic: writes to a temp file, then renames over the target.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Parses the whole file before returning; a truncated or corrupt file
/// throws CheckpointError and leaves no partial state anywhere.
Checkpoint load_checkpoint(const std::string& path);

/// Captures parameters, optimizer state, step counter, and both RNG stream
/// positions. spec_echo is the flat key=value experiment description.
Checkpoint make_checkpoint(const std::string& spec_echo, const Model& model,
                           const TrainerState& state);

/// Restores parameter values (names and shapes must match the model) and
/// rebuilds the trainer state recorded in the checkpoint.
TrainerState apply_checkpoint(const Checkpoint& ckpt, Model& model);

}  // namespace ntmlab
