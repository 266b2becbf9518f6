#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntmlab/lstm.hpp"
#include "ntmlab/model.hpp"
#include "ntmlab/params.hpp"
#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"

namespace ntmlab {

enum class InitScheme { kConstant, kLearned, kRandom };

std::string init_scheme_name(InitScheme scheme);
InitScheme init_scheme_from_name(const std::string& name);

/// Memory contents under the constant scheme.
inline constexpr double kConstantMemoryInit = 1e-6;
/// Denominator guard in cosine similarity (constant-init rows are tiny).
inline constexpr double kCosineEps = 1e-8;
/// Denominator guard when renormalizing sharpened weights.
inline constexpr double kSharpenEps = 1e-16;
/// Random-scheme draw: truncated normal, mean 0, sd 0.5, cut at +/- 2 sd.
inline constexpr double kRandomInitSd = 0.5;
inline constexpr double kRandomInitNumSd = 2.0;

struct NtmConfig {
  std::size_t memory_rows = 128;      // N
  std::size_t memory_width = 20;      // W
  std::size_t num_read_heads = 1;     // H_r
  std::size_t num_write_heads = 1;    // H_w
  std::size_t shift_range = 3;        // odd kernel size; offsets {-1, 0, +1}
  InitScheme init_scheme = InitScheme::kConstant;
  double clip_bound = 20.0;           // controller-output clip magnitude
  bool clip_hidden = false;           // clip the controller hidden vector too

  void validate() const;
  /// Raw slots per read head: [k | beta | g | s | gamma].
  std::size_t read_raw_size() const { return memory_width + 3 + shift_range; }
  /// Raw slots per write head: [k | beta | g | s | gamma | e | a].
  std::size_t write_raw_size() const { return 3 * memory_width + 3 + shift_range; }
};

/// One head's decoded addressing parameters (plus erase/add for write heads),
/// as tape nodes with all range constraints applied.
struct HeadVars {
  Var key;         // {W}, tanh-bounded
  Var beta;        // {1}, softplus >= 0
  Var gate;        // {1}, sigmoid in [0,1]
  Var shift_dist;  // {shift_range}, softmax simplex
  Var gamma;       // {1}, softplus + 1 >= 1
  Var erase;       // write heads: {W}, sigmoid in [0,1]
  Var add;         // write heads: {W}, tanh-bounded
  bool is_write = false;
};

/// Memory matrix plus per-head attention state. weights holds read heads
/// first, then write heads; reads holds one vector per read head.
struct NtmStateVars {
  Var memory;  // {N, W}
  std::vector<Var> weights;
  std::vector<Var> reads;
};

// -- addressing and memory access, Eqs. (1)-(8) -------------------------------

/// Clips raw to (-clip_bound, clip_bound), splits it by the documented slot
/// layout and applies the per-parameter nonlinearities.
HeadVars decode_head_params(Tape& tape, Var raw, bool is_write,
                            const NtmConfig& cfg);

/// u . v / (|u| |v| + eps), scalar in [-1, 1].
Var cosine_similarity(Tape& tape, Var u, Var v);

/// softmax over rows of beta * K[key, M(i)].
Var content_addressing(Tape& tape, Var memory, Var key, Var beta);

/// g * w_content + (1 - g) * w_prev.
Var interpolate(Tape& tape, Var w_content, Var w_prev, Var gate);

/// Circular convolution of the weighting with the shift kernel.
Var shift(Tape& tape, Var w_gated, Var shift_dist);

/// w^gamma, renormalized.
Var sharpen(Tape& tape, Var w_shifted, Var gamma);

/// Full addressing chain: content, interpolate, shift, sharpen.
Var address(Tape& tape, Var memory, const HeadVars& head, Var w_prev);

/// r = sum_i w(i) M(i).
Var read_memory(Tape& tape, Var memory, Var w);

/// Erase-then-add for one head: M'(i) = M(i) (1 - w(i) e) + w(i) a.
Var write_memory(Tape& tape, Var memory, Var w, Var erase, Var add);

// -- the full cell -------------------------------------------------------------

class NtmModel : public Model {
 public:
  NtmModel(NtmConfig cfg, std::size_t controller_units,
           std::size_t controller_layers, std::size_t input_dim,
           std::size_t output_dim, std::uint64_t init_seed);

  ParameterStore& params() override { return store_; }
  const ParameterStore& params() const override { return store_; }
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t output_dim() const override { return output_dim_; }
  const NtmConfig& config() const { return cfg_; }
  std::size_t controller_units() const { return controller_units_; }

  /// t = 0 state: memory per the configured scheme, w0 = softmax of learned
  /// logits per head, r0 = tanh of learned raw vectors per read head.
  NtmStateVars init_state(Tape& tape, const Bindings& bindings, Rng& rng) const;

  struct CellOut {
    Var output;  // {D_out} external logits, clipped with the head params
    NtmStateVars state;
    std::vector<LstmStateVars> controller;
  };

  /// One timestep: the controller reads concat(x, previous reads), a single
  /// projection emits every head's raw parameters plus the output logits,
  /// read heads address and read M_{t-1}, then write heads (also addressed
  /// against M_{t-1}) apply erase-then-add in head order to produce M_t.
  CellOut cell_step(Tape& tape, const Bindings& bindings, Var x,
                    const NtmStateVars& state,
                    const std::vector<LstmStateVars>& controller) const;

  Var build_episode(Tape& tape, const Bindings& bindings, const Episode& episode,
                    Rng& rng) const override;

 private:
  std::size_t projection_size() const;

  NtmConfig cfg_;
  std::size_t controller_units_, controller_layers_;
  std::size_t input_dim_, output_dim_;
  ParameterStore store_;
};

}  // namespace ntmlab
