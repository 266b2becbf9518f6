#pragma once

#include "ntmlab/params.hpp"
#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"
#include "ntmlab/tasks.hpp"

namespace ntmlab {

/// Common contract for the NTM and the LSTM baseline: given one episode,
/// build the unrolled forward pass on a tape and return the {T, D_out}
/// logits node. The training loop is model-agnostic through this interface.
class Model {
 public:
  virtual ~Model() = default;

  virtual ParameterStore& params() = 0;
  virtual const ParameterStore& params() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  /// rng feeds schemes that sample at episode start (random memory init);
  /// models that never sample must not draw from it.
  virtual Var build_episode(Tape& tape, const Bindings& bindings,
                            const Episode& episode, Rng& rng) const = 0;
};

}  // namespace ntmlab
