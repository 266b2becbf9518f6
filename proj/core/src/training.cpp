#include "ntmlab/training.hpp"

#include <chrono>
#include <cmath>

namespace ntmlab {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate <= 0");
  if (max_grad_norm <= 0.0) throw std::invalid_argument("train: max_grad_norm <= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  if (total_steps < 1) throw std::invalid_argument("train: total_steps < 1");
  if (eval_every < 1 || eval_every > total_steps) {
    throw std::invalid_argument("train: need 1 <= eval_every <= total_steps");
  }
  if (eval_examples < 1) throw std::invalid_argument("train: eval_examples < 1");
  task.validate();
}

Var masked_bce_loss(Tape& tape, Var logits, const Tensor& targets,
                    const std::vector<std::uint8_t>& mask) {
  const Tensor& z = tape.value(logits);
  if (!z.same_shape(targets)) {
    throw ShapeError("masked_bce_loss: logits " + shape_str(z.shape()) +
                     " targets " + shape_str(targets.shape()));
  }
  if (z.rank() != 2 || z.dim(0) != mask.size()) {
    throw ShapeError("masked_bce_loss: mask length " +
                     std::to_string(mask.size()) + " vs logits " +
                     shape_str(z.shape()));
  }
  std::size_t masked = 0;
  for (std::uint8_t m : mask) masked += m;
  if (masked == 0) {
    throw std::invalid_argument("masked_bce_loss: mask is all zero");
  }

  const std::size_t steps = z.dim(0), width = z.dim(1);
  Tensor mask_rows({steps, width});
  for (std::size_t t = 0; t < steps; ++t) {
    if (!mask[t]) continue;
    for (std::size_t d = 0; d < width; ++d) mask_rows.at(t, d) = 1.0;
  }

  Var y = tape.constant(targets);
  Var per_entry = tape.sub(tape.softplus(logits), tape.mul(logits, y));
  Var masked_sum = tape.sum_all(tape.mul(per_entry, tape.constant(mask_rows)));
  return tape.scale_const(masked_sum,
                          1.0 / static_cast<double>(masked * width));
}

double bits_per_sequence(const Tensor& logits, const Tensor& targets,
                         const std::vector<std::uint8_t>& mask) {
  if (!logits.same_shape(targets) || logits.rank() != 2 ||
      logits.dim(0) != mask.size()) {
    throw ShapeError("bits_per_sequence: logits " + shape_str(logits.shape()) +
                     " targets " + shape_str(targets.shape()));
  }
  double wrong = 0.0;
  for (std::size_t t = 0; t < logits.dim(0); ++t) {
    if (!mask[t]) continue;
    for (std::size_t d = 0; d < logits.dim(1); ++d) {
      const bool predicted = logits.at(t, d) >= 0.0;  // sigmoid(z) >= 0.5
      const bool expected = targets.at(t, d) >= 0.5;
      if (predicted != expected) wrong += 1.0;
    }
  }
  return wrong;
}

double clip_by_global_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g[i];
      if (!std::isfinite(x)) throw NonFiniteError("gradient of " + name, x);
      sq += x * x;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
    }
  }
  return norm;
}

AdamState::AdamState(const ParameterStore& store) {
  for (const std::string& name : store.names()) {
    m_[name] = Tensor(store.value(name).shape());
    v_[name] = Tensor(store.value(name).shape());
  }
}

void AdamState::step(ParameterStore& store, const Gradients& grads,
                     double learning_rate, const AdamConfig& cfg) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (const std::string& name : store.names()) {
    Tensor& p = store.value(name);
    const Tensor& g = grads.at(name);
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void AdamState::restore(std::size_t t, std::map<std::string, Tensor> m,
                        std::map<std::string, Tensor> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

EvalResult evaluate(const Model& model, const TaskConfig& task, std::size_t n,
                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("evaluate: need n >= 1");
  Rng stream(seed);
  double loss_sum = 0.0;
  double bits_sum = 0.0;
  std::size_t done = 0;
  // Episodes are grouped a few dozen per tape so parameter leaves are not
  // re-copied for every single episode.
  constexpr std::size_t kChunk = 32;
  while (done < n) {
    const std::size_t count = std::min(kChunk, n - done);
    Tape tape;
    Bindings bindings = bind(tape, model.params());
    for (std::size_t i = 0; i < count; ++i) {
      Episode ep = generate_episode(task, stream);
      Var logits = model.build_episode(tape, bindings, ep, stream);
      loss_sum += tape.value(masked_bce_loss(tape, logits, ep.targets, ep.mask))[0];
      bits_sum += bits_per_sequence(tape.value(logits), ep.targets, ep.mask);
    }
    done += count;
  }
  return EvalResult{loss_sum / static_cast<double>(n),
                    bits_sum / static_cast<double>(n)};
}

std::uint64_t model_init_seed(std::uint64_t run_seed) {
  return derive_seed(run_seed, 0);
}

TrainerState make_trainer_state(const Model& model, const TrainConfig& cfg) {
  TrainerState state;
  state.adam = AdamState(model.params());
  state.train_stream = Rng(derive_seed(cfg.seed, 1));
  state.val_stream = Rng(derive_seed(cfg.seed, 2));
  return state;
}

namespace {

void check_store_finite(const ParameterStore& store) {
  for (const std::string& name : store.names()) {
    const Tensor& p = store.value(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(p[i])) throw NonFiniteError("parameter " + name, p[i]);
    }
  }
}

}  // namespace

TrainReport train(Model& model, const TrainConfig& cfg, TrainerState& state,
                  const CurveSink& sink) {
  cfg.validate();
  TrainReport report;
  const auto started = std::chrono::steady_clock::now();

  while (state.step < cfg.total_steps) {
    const std::size_t step = state.step + 1;
    try {
      Tape tape;
      Bindings bindings = bind(tape, model.params());
      Var loss;
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        Episode ep = generate_episode(cfg.task, state.train_stream);
        Var logits = model.build_episode(tape, bindings, ep, state.train_stream);
        Var ep_loss = masked_bce_loss(tape, logits, ep.targets, ep.mask);
        loss = loss.valid() ? tape.add(loss, ep_loss) : ep_loss;
      }
      loss = tape.scale_const(loss, 1.0 / static_cast<double>(cfg.batch_size));

      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw NonFiniteError("training loss", loss_value);
      }

      Gradients grads = tape.backward(loss);
      clip_by_global_norm(grads, cfg.max_grad_norm);
      state.adam.step(model.params(), grads, cfg.learning_rate);
      check_store_finite(model.params());
    } catch (const NonFiniteError& err) {
      report.aborted = true;
      report.abort_diagnostic =
          "step=" + std::to_string(step) + " " + err.where() + " value=" +
          std::to_string(err.value());
      report.final_step = state.step;
      return report;
    }
    state.step = step;

    if (step % cfg.eval_every == 0) {
      const std::uint64_t eval_seed = state.val_stream.next_u64();
      const EvalResult eval =
          evaluate(model, cfg.task, cfg.eval_examples, eval_seed);
      CurvePoint point;
      point.step = step;
      point.val_loss = eval.loss;
      point.val_bits_per_seq = eval.bits_per_seq;
      point.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
      report.curve.push_back(point);
      if (sink) sink(point);
      if (cfg.stop_below_bits >= 0.0 &&
          point.val_bits_per_seq < cfg.stop_below_bits) {
        break;
      }
    }
  }
  report.final_step = state.step;
  return report;
}

}  // namespace ntmlab
