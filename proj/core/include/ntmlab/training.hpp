#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ntmlab/model.hpp"
#include "ntmlab/params.hpp"
#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"
#include "ntmlab/tasks.hpp"

namespace ntmlab {

/// Raised when a non-finite value shows up in a loss, gradient, or parameter.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string where, double value)
      : std::runtime_error("non-finite value " + std::to_string(value) + " in " +
                           where),
        where_(std::move(where)), value_(value) {}

  const std::string& where() const { return where_; }
  double value() const { return value_; }

 private:
  std::string where_;
  double value_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double max_grad_norm = 50.0;
  std::size_t batch_size = 32;
  std::size_t total_steps = 10000;
  std::size_t eval_every = 200;
  std::size_t eval_examples = 640;
  std::uint64_t seed = 1;
  /// Optional early stop once validation bits-per-sequence falls below this
  /// value; negative disables. Part of the config, so runs stay deterministic.
  double stop_below_bits = -1.0;
  TaskConfig task;

  void validate() const;
};

/// One learning-curve sample.
struct CurvePoint {
  std::size_t step = 0;
  double val_loss = 0.0;
  double val_bits_per_seq = 0.0;
  double wall_ms = 0.0;
};

/// Mean masked sigmoid cross-entropy, computed as softplus(z) - z*y (the
/// stable max(z,0) - z*y + log(1 + exp(-|z|)) form). The mean runs over
/// masked steps and channels. An all-zero mask is a malformed episode.
Var masked_bce_loss(Tape& tape, Var logits, const Tensor& targets,
                    const std::vector<std::uint8_t>& mask);

/// Count of wrongly thresholded bits over masked positions for one episode.
/// A logit z predicts 1 iff sigmoid(z) >= 0.5, i.e. z >= 0.
double bits_per_sequence(const Tensor& logits, const Tensor& targets,
                         const std::vector<std::uint8_t>& mask);

/// Scales all gradients by max_norm / n when the global norm n exceeds
/// max_norm (boundary inclusive: n == max_norm is left untouched). Returns
/// the pre-clip norm. Throws NonFiniteError naming the offending parameter.
double clip_by_global_norm(Gradients& grads, double max_norm);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction: m and v per parameter plus the step counter.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const ParameterStore& store);

  void step(ParameterStore& store, const Gradients& grads, double learning_rate,
            const AdamConfig& cfg = {});

  std::size_t t() const { return t_; }
  const Tensor& m(const std::string& name) const { return m_.at(name); }
  const Tensor& v(const std::string& name) const { return v_.at(name); }

  /// Checkpoint restore access.
  void restore(std::size_t t, std::map<std::string, Tensor> m,
               std::map<std::string, Tensor> v);
  const std::map<std::string, Tensor>& m_all() const { return m_; }
  const std::map<std::string, Tensor>& v_all() const { return v_; }

 private:
  std::map<std::string, Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct EvalResult {
  double loss = 0.0;
  double bits_per_seq = 0.0;
};

/// Mean loss and bits-per-sequence over n freshly generated episodes from a
/// stream seeded with `seed`. Pure: parameters are read, never written.
EvalResult evaluate(const Model& model, const TaskConfig& task, std::size_t n,
                    std::uint64_t seed);

/// Everything that evolves during a run; checkpoints capture exactly this
/// plus the parameter store.
struct TrainerState {
  std::size_t step = 0;
  AdamState adam;
  Rng train_stream{0};
  Rng val_stream{0};
};

TrainerState make_trainer_state(const Model& model, const TrainConfig& cfg);

/// Seed for constructing a model that will train under cfg.
std::uint64_t model_init_seed(std::uint64_t run_seed);

struct TrainReport {
  std::vector<CurvePoint> curve;
  bool aborted = false;
  std::string abort_diagnostic;
  std::size_t final_step = 0;
};

using CurveSink = std::function<void(const CurvePoint&)>;

/// Runs training from state.step to cfg.total_steps (or the early-stop
/// threshold). Asserts every step that losses, gradients, and parameters are
/// finite; a violation aborts the run with a diagnostic instead of training
/// through garbage. Fully deterministic given cfg and the incoming state.
TrainReport train(Model& model, const TrainConfig& cfg, TrainerState& state,
                  const CurveSink& sink = nullptr);

}  // namespace ntmlab
