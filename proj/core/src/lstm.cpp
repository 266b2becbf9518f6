#include "ntmlab/lstm.hpp"

#include <cmath>

namespace ntmlab {

void register_lstm_layer(ParameterStore& store, const std::string& prefix,
                         std::size_t input, std::size_t hidden, Rng& rng) {
  store.add(prefix + ".wx", uniform_fanin_init({input, 4 * hidden}, input, rng));
  store.add(prefix + ".wh", uniform_fanin_init({hidden, 4 * hidden}, hidden, rng));
  Tensor b({4 * hidden});
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;  // forget gate
  store.add(prefix + ".b", std::move(b));
}

LstmLayerVars bind_lstm_layer(const Bindings& bindings, const std::string& prefix,
                              std::size_t hidden) {
  return LstmLayerVars{bindings.at(prefix + ".wx"), bindings.at(prefix + ".wh"),
                       bindings.at(prefix + ".b"), hidden};
}

LstmStateVars lstm_step(Tape& tape, Var x, const LstmStateVars& state,
                        const LstmLayerVars& layer) {
  const std::size_t in = tape.value(x).size();
  const std::size_t hidden = layer.hidden;

  Var zx = tape.matmul(tape.reshape(x, {1, in}), layer.wx);
  Var zh = tape.matmul(tape.reshape(state.h, {1, hidden}), layer.wh);
  Var z = tape.add(tape.reshape(tape.add(zx, zh), {4 * hidden}), layer.b);

  Var i = tape.sigmoid(tape.slice(z, 0, 0, hidden));
  Var f = tape.sigmoid(tape.slice(z, 0, hidden, hidden));
  Var o = tape.sigmoid(tape.slice(z, 0, 2 * hidden, hidden));
  Var g = tape.tanh(tape.slice(z, 0, 3 * hidden, hidden));

  Var c = tape.add(tape.mul(f, state.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return LstmStateVars{h, c};
}

std::pair<Var, std::vector<LstmStateVars>> stacked_step(
    Tape& tape, Var x, const std::vector<LstmStateVars>& states,
    const std::vector<LstmLayerVars>& layers) {
  std::vector<LstmStateVars> next;
  next.reserve(layers.size());
  Var input = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    next.push_back(lstm_step(tape, input, states[l], layers[l]));
    input = next.back().h;
  }
  return {input, std::move(next)};
}

std::vector<LstmStateVars> zero_lstm_state(Tape& tape,
                                           const std::vector<LstmLayerVars>& layers) {
  std::vector<LstmStateVars> states;
  states.reserve(layers.size());
  for (const LstmLayerVars& layer : layers) {
    states.push_back(LstmStateVars{tape.constant(Tensor({layer.hidden})),
                                   tape.constant(Tensor({layer.hidden}))});
  }
  return states;
}

LstmBaselineModel::LstmBaselineModel(std::size_t layers, std::size_t hidden,
                                     std::size_t input_dim, std::size_t output_dim,
                                     std::uint64_t init_seed)
    : layers_(layers), hidden_(hidden), input_dim_(input_dim),
      output_dim_(output_dim) {
  Rng rng(init_seed);
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < layers_; ++l) {
    register_lstm_layer(store_, "lstm.l" + std::to_string(l), in, hidden_, rng);
    in = hidden_;
  }
  store_.add("out.w", uniform_fanin_init({hidden_, output_dim_}, hidden_, rng));
  store_.add("out.b", Tensor({output_dim_}));
}

Var LstmBaselineModel::build_episode(Tape& tape, const Bindings& bindings,
                                     const Episode& episode, Rng&) const {
  std::vector<LstmLayerVars> layers;
  layers.reserve(layers_);
  for (std::size_t l = 0; l < layers_; ++l) {
    layers.push_back(bind_lstm_layer(bindings, "lstm.l" + std::to_string(l), hidden_));
  }
  Var out_w = bindings.at("out.w");
  Var out_b = bindings.at("out.b");

  std::vector<LstmStateVars> states = zero_lstm_state(tape, layers);
  const std::size_t steps = episode.steps();
  std::vector<Var> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x({input_dim_});
    for (std::size_t d = 0; d < input_dim_; ++d) x[d] = episode.inputs.at(t, d);
    Var xv = tape.constant(std::move(x));
    auto [top, next] = stacked_step(tape, xv, states, layers);
    states = std::move(next);
    Var logits = tape.add(
        tape.reshape(tape.matmul(tape.reshape(top, {1, hidden_}), out_w),
                     {output_dim_}),
        out_b);
    rows.push_back(tape.reshape(logits, {1, output_dim_}));
  }
  return tape.concat(rows, 0);
}

}  // namespace ntmlab
