#include "ntmlab/ntm.hpp"

#include <stdexcept>

namespace ntmlab {

std::string init_scheme_name(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kConstant:
      return "constant";
    case InitScheme::kLearned:
      return "learned";
    case InitScheme::kRandom:
      return "random";
  }
  throw std::logic_error("init_scheme_name: bad scheme");
}

InitScheme init_scheme_from_name(const std::string& name) {
  if (name == "constant") return InitScheme::kConstant;
  if (name == "learned") return InitScheme::kLearned;
  if (name == "random") return InitScheme::kRandom;
  throw std::invalid_argument("unknown init scheme: " + name);
}

void NtmConfig::validate() const {
  if (memory_rows < 2) throw std::invalid_argument("ntm: memory_rows must be >= 2");
  if (memory_width < 1) throw std::invalid_argument("ntm: memory_width must be >= 1");
  if (num_read_heads < 1 || num_write_heads < 1) {
    throw std::invalid_argument("ntm: need at least one read and one write head");
  }
  if (shift_range % 2 == 0 || shift_range > memory_rows) {
    throw std::invalid_argument("ntm: shift_range must be odd and <= memory_rows");
  }
  if (clip_bound <= 0.0) throw std::invalid_argument("ntm: clip_bound must be > 0");
}

HeadVars decode_head_params(Tape& tape, Var raw, bool is_write,
                            const NtmConfig& cfg) {
  const std::size_t w = cfg.memory_width;
  const std::size_t s = cfg.shift_range;
  const std::size_t expected = is_write ? cfg.write_raw_size() : cfg.read_raw_size();
  const std::size_t actual = tape.value(raw).size();
  if (actual != expected) {
    throw ShapeError("decode_head_params: raw has " + std::to_string(actual) +
                     " slots, expected " + std::to_string(expected));
  }

  Var clipped = tape.clip(raw, -cfg.clip_bound, cfg.clip_bound);
  HeadVars head;
  head.is_write = is_write;
  head.key = tape.tanh(tape.slice(clipped, 0, 0, w));
  head.beta = tape.softplus(tape.slice(clipped, 0, w, 1));
  head.gate = tape.sigmoid(tape.slice(clipped, 0, w + 1, 1));
  head.shift_dist = tape.softmax(tape.slice(clipped, 0, w + 2, s), 0);
  head.gamma = tape.add_const(tape.softplus(tape.slice(clipped, 0, w + 2 + s, 1)), 1.0);
  if (is_write) {
    head.erase = tape.sigmoid(tape.slice(clipped, 0, w + 3 + s, w));
    head.add = tape.tanh(tape.slice(clipped, 0, 2 * w + 3 + s, w));
  }
  return head;
}

Var cosine_similarity(Tape& tape, Var u, Var v) {
  Var dot = tape.sum_all(tape.mul(u, v));
  Var denom = tape.add_const(tape.mul(tape.l2_norm(u), tape.l2_norm(v)), kCosineEps);
  return tape.mul(dot, tape.pow_const(denom, -1.0));
}

Var content_addressing(Tape& tape, Var memory, Var key, Var beta) {
  const Tensor& m = tape.value(memory);
  const std::size_t rows = m.dim(0), width = m.dim(1);

  Var dots = tape.reshape(tape.matmul(memory, tape.reshape(key, {width, 1})), {rows});
  Var row_norms = tape.pow_const(tape.sum(tape.mul(memory, memory), 1), 0.5);
  Var key_norm = tape.l2_norm(key);
  Var denom = tape.add_const(tape.scale(row_norms, key_norm), kCosineEps);
  Var sims = tape.mul(dots, tape.pow_const(denom, -1.0));
  return tape.softmax(tape.scale(sims, beta), 0);
}

Var interpolate(Tape& tape, Var w_content, Var w_prev, Var gate) {
  return tape.add(tape.scale(w_content, gate),
                  tape.scale(w_prev, one_minus(tape, gate)));
}

Var shift(Tape& tape, Var w_gated, Var shift_dist) {
  return tape.circular_convolve_1d(w_gated, shift_dist);
}

Var sharpen(Tape& tape, Var w_shifted, Var gamma) {
  // Eq. 5 is scale-invariant in its base, so divide by the max entry first
  // (cf. max-subtraction in softmax): the powered sum then stays >= 1 and the
  // eps guard cannot distort the simplex even for large gamma.
  const Tensor& w = tape.value(w_shifted);
  double mx = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mx = std::max(mx, w[i]);
  if (mx <= 0.0) mx = 1.0;
  Var powered = tape.pow(tape.scale_const(w_shifted, 1.0 / mx), gamma);
  Var denom = tape.add_const(tape.sum_all(powered), kSharpenEps);
  return tape.scale(powered, tape.pow_const(denom, -1.0));
}

Var address(Tape& tape, Var memory, const HeadVars& head, Var w_prev) {
  Var w_content = content_addressing(tape, memory, head.key, head.beta);
  Var w_gated = interpolate(tape, w_content, w_prev, head.gate);
  Var w_shifted = shift(tape, w_gated, head.shift_dist);
  return sharpen(tape, w_shifted, head.gamma);
}

Var read_memory(Tape& tape, Var memory, Var w) {
  const Tensor& m = tape.value(memory);
  return tape.reshape(
      tape.matmul(tape.reshape(w, {1, m.dim(0)}), memory), {m.dim(1)});
}

Var write_memory(Tape& tape, Var memory, Var w, Var erase, Var add) {
  Var erased = tape.mul(memory, one_minus(tape, outer(tape, w, erase)));
  return tape.add(erased, outer(tape, w, add));
}

NtmModel::NtmModel(NtmConfig cfg, std::size_t controller_units,
                   std::size_t controller_layers, std::size_t input_dim,
                   std::size_t output_dim, std::uint64_t init_seed)
    : cfg_(cfg), controller_units_(controller_units),
      controller_layers_(controller_layers), input_dim_(input_dim),
      output_dim_(output_dim) {
  cfg_.validate();
  if (controller_units_ < 1 || controller_layers_ < 1) {
    throw std::invalid_argument("ntm: controller needs >= 1 layer and >= 1 unit");
  }

  Rng rng(init_seed);
  std::size_t in = input_dim_ + cfg_.num_read_heads * cfg_.memory_width;
  for (std::size_t l = 0; l < controller_layers_; ++l) {
    register_lstm_layer(store_, "ctrl.l" + std::to_string(l), in, controller_units_,
                        rng);
    in = controller_units_;
  }
  store_.add("proj.w", uniform_fanin_init({controller_units_, projection_size()},
                                          controller_units_, rng));
  store_.add("proj.b", Tensor({projection_size()}));

  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    store_.add("init.w0.read" + std::to_string(i), Tensor({cfg_.memory_rows}));
  }
  for (std::size_t j = 0; j < cfg_.num_write_heads; ++j) {
    store_.add("init.w0.write" + std::to_string(j), Tensor({cfg_.memory_rows}));
  }
  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    store_.add("init.r0.read" + std::to_string(i), Tensor({cfg_.memory_width}));
  }
  if (cfg_.init_scheme == InitScheme::kLearned) {
    Tensor m0({cfg_.memory_rows, cfg_.memory_width});
    for (std::size_t i = 0; i < m0.size(); ++i) {
      m0[i] = rng.truncated_normal(0.0, kRandomInitSd, kRandomInitNumSd);
    }
    store_.add("init.m0", std::move(m0));
  }
}

std::size_t NtmModel::projection_size() const {
  return cfg_.num_read_heads * cfg_.read_raw_size() +
         cfg_.num_write_heads * cfg_.write_raw_size() + output_dim_;
}

NtmStateVars NtmModel::init_state(Tape& tape, const Bindings& bindings,
                                  Rng& rng) const {
  NtmStateVars state;
  switch (cfg_.init_scheme) {
    case InitScheme::kConstant:
      state.memory = tape.constant(
          Tensor::full({cfg_.memory_rows, cfg_.memory_width}, kConstantMemoryInit));
      break;
    case InitScheme::kLearned:
      state.memory = bindings.at("init.m0");
      break;
    case InitScheme::kRandom: {
      Tensor m0({cfg_.memory_rows, cfg_.memory_width});
      for (std::size_t i = 0; i < m0.size(); ++i) {
        m0[i] = rng.truncated_normal(0.0, kRandomInitSd, kRandomInitNumSd);
      }
      state.memory = tape.constant(std::move(m0));
      break;
    }
  }

  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    state.weights.push_back(
        tape.softmax(bindings.at("init.w0.read" + std::to_string(i)), 0));
  }
  for (std::size_t j = 0; j < cfg_.num_write_heads; ++j) {
    state.weights.push_back(
        tape.softmax(bindings.at("init.w0.write" + std::to_string(j)), 0));
  }
  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    state.reads.push_back(tape.tanh(bindings.at("init.r0.read" + std::to_string(i))));
  }
  return state;
}

NtmModel::CellOut NtmModel::cell_step(Tape& tape, const Bindings& bindings, Var x,
                                      const NtmStateVars& state,
                                      const std::vector<LstmStateVars>& controller) const {
  std::vector<LstmLayerVars> layers;
  layers.reserve(controller_layers_);
  for (std::size_t l = 0; l < controller_layers_; ++l) {
    layers.push_back(
        bind_lstm_layer(bindings, "ctrl.l" + std::to_string(l), controller_units_));
  }

  std::vector<Var> ctrl_inputs = {x};
  for (Var r : state.reads) ctrl_inputs.push_back(r);
  Var ctrl_in = tape.concat(ctrl_inputs, 0);

  auto [top, next_controller] = stacked_step(tape, ctrl_in, controller, layers);
  if (cfg_.clip_hidden) {
    top = tape.clip(top, -cfg_.clip_bound, cfg_.clip_bound);
  }

  Var proj = tape.add(
      tape.reshape(tape.matmul(tape.reshape(top, {1, controller_units_}),
                               bindings.at("proj.w")),
                   {projection_size()}),
      bindings.at("proj.b"));
  proj = tape.clip(proj, -cfg_.clip_bound, cfg_.clip_bound);

  CellOut out;
  out.controller = std::move(next_controller);
  out.state.memory = state.memory;

  std::size_t offset = 0;
  std::vector<HeadVars> read_heads, write_heads;
  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    Var raw = tape.slice(proj, 0, offset, cfg_.read_raw_size());
    offset += cfg_.read_raw_size();
    read_heads.push_back(decode_head_params(tape, raw, /*is_write=*/false, cfg_));
  }
  for (std::size_t j = 0; j < cfg_.num_write_heads; ++j) {
    Var raw = tape.slice(proj, 0, offset, cfg_.write_raw_size());
    offset += cfg_.write_raw_size();
    write_heads.push_back(decode_head_params(tape, raw, /*is_write=*/true, cfg_));
  }
  out.output = tape.slice(proj, 0, offset, output_dim_);

  // Read heads see M_{t-1}.
  for (std::size_t i = 0; i < cfg_.num_read_heads; ++i) {
    Var w = address(tape, state.memory, read_heads[i], state.weights[i]);
    out.state.weights.push_back(w);
    out.state.reads.push_back(read_memory(tape, state.memory, w));
  }
  // Write heads also address M_{t-1}; erase-then-add applies sequentially.
  std::vector<Var> write_ws;
  for (std::size_t j = 0; j < cfg_.num_write_heads; ++j) {
    Var w = address(tape, state.memory, write_heads[j],
                    state.weights[cfg_.num_read_heads + j]);
    write_ws.push_back(w);
    out.state.weights.push_back(w);
  }
  Var memory = state.memory;
  for (std::size_t j = 0; j < cfg_.num_write_heads; ++j) {
    memory = write_memory(tape, memory, write_ws[j], write_heads[j].erase,
                          write_heads[j].add);
  }
  out.state.memory = memory;
  return out;
}

Var NtmModel::build_episode(Tape& tape, const Bindings& bindings,
                            const Episode& episode, Rng& rng) const {
  std::vector<LstmLayerVars> layers;
  for (std::size_t l = 0; l < controller_layers_; ++l) {
    layers.push_back(
        bind_lstm_layer(bindings, "ctrl.l" + std::to_string(l), controller_units_));
  }
  NtmStateVars state = init_state(tape, bindings, rng);
  std::vector<LstmStateVars> controller = zero_lstm_state(tape, layers);

  const std::size_t steps = episode.steps();
  std::vector<Var> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x({input_dim_});
    for (std::size_t d = 0; d < input_dim_; ++d) x[d] = episode.inputs.at(t, d);
    CellOut step = cell_step(tape, bindings, tape.constant(std::move(x)), state,
                             controller);
    state = std::move(step.state);
    controller = std::move(step.controller);
    rows.push_back(tape.reshape(step.output, {1, output_dim_}));
  }
  return tape.concat(rows, 0);
}

}  // namespace ntmlab
