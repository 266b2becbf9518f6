#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntmlab/model.hpp"
#include "ntmlab/params.hpp"
#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"

namespace ntmlab {

/// One LSTM layer's bound parameters. Weights pack the four gates along the
/// output axis in the order [input | forget | output | candidate]:
/// wx {in, 4H}, wh {H, 4H}, b {4H}.
struct LstmLayerVars {
  Var wx, wh, b;
  std::size_t hidden = 0;
};

struct LstmStateVars {
  Var h, c;
};

/// Registers one layer's parameters: weights uniform in
/// [-sqrt(1/fan_in), +sqrt(1/fan_in)], forget-gate bias +1, other biases 0.
void register_lstm_layer(ParameterStore& store, const std::string& prefix,
                         std::size_t input, std::size_t hidden, Rng& rng);

LstmLayerVars bind_lstm_layer(const Bindings& bindings, const std::string& prefix,
                              std::size_t hidden);

/// Standard LSTM cell update: i,f,o = sigmoid gates, c' = f*c + i*tanh(g),
/// h' = o*tanh(c'). x is a vector {in}; state vectors are {H}.
LstmStateVars lstm_step(Tape& tape, Var x, const LstmStateVars& state,
                        const LstmLayerVars& layer);

/// Feeds layer i-1's hidden output to layer i; returns the top hidden vector
/// and all updated layer states.
std::pair<Var, std::vector<LstmStateVars>> stacked_step(
    Tape& tape, Var x, const std::vector<LstmStateVars>& states,
    const std::vector<LstmLayerVars>& layers);

/// Zero-initialized hidden and cell vectors for each layer.
std::vector<LstmStateVars> zero_lstm_state(Tape& tape,
                                           const std::vector<LstmLayerVars>& layers);

/// Stacked-LSTM baseline: unrolled stack plus a linear output layer, same
/// (episode -> per-step logits) contract as the NTM.
class LstmBaselineModel : public Model {
 public:
  LstmBaselineModel(std::size_t layers, std::size_t hidden, std::size_t input_dim,
                    std::size_t output_dim, std::uint64_t init_seed);

  ParameterStore& params() override { return store_; }
  const ParameterStore& params() const override { return store_; }
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t output_dim() const override { return output_dim_; }

  Var build_episode(Tape& tape, const Bindings& bindings, const Episode& episode,
                    Rng& rng) const override;

  std::size_t num_layers() const { return layers_; }
  std::size_t hidden_units() const { return hidden_; }

 private:
  std::size_t layers_, hidden_, input_dim_, output_dim_;
  ParameterStore store_;
};

}  // namespace ntmlab
