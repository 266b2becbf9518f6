#pragma once

// Central finite-difference gradient oracle. Deliberately independent of
// Tape::backward: it only ever evaluates forward values of freshly built
// tapes, so it can referee the reverse pass.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "ntmlab/model.hpp"
#include "ntmlab/rng.hpp"
#include "ntmlab/tape.hpp"
#include "ntmlab/tensor.hpp"
#include "ntmlab/training.hpp"

namespace ntmlab::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;

  bool ok(double tol) const { return max_rel_err < tol; }
};

/// build(tape, vars) must construct a scalar loss from the named leaves.
/// Relative error uses denominator max(|fd|, |reverse|, 1e-8).
template <typename BuildFn>
GradCheckResult gradcheck(const BuildFn& build,
                          const std::map<std::string, Tensor>& inputs,
                          double h = 1e-5) {
  auto eval = [&](const std::map<std::string, Tensor>& values) {
    Tape tape;
    std::map<std::string, Var> vars;
    for (const auto& [name, tensor] : values) {
      vars[name] = tape.param(name, tensor);
    }
    Var loss = build(tape, vars);
    return tape.value(loss)[0];
  };

  Tape tape;
  std::map<std::string, Var> vars;
  for (const auto& [name, tensor] : inputs) vars[name] = tape.param(name, tensor);
  Var loss = build(tape, vars);
  const Gradients grads = tape.backward(loss);

  GradCheckResult result;
  std::map<std::string, Tensor> work = inputs;
  for (const auto& [name, tensor] : inputs) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double keep = work.at(name)[i];
      work.at(name)[i] = keep + h;
      const double fp = eval(work);
      work.at(name)[i] = keep - h;
      const double fm = eval(work);
      work.at(name)[i] = keep;

      const double fd = (fp - fm) / (2.0 * h);
      const double rev = grads.at(name)[i];
      const double denom = std::max({std::fabs(fd), std::fabs(rev), 1e-8});
      const double rel = std::fabs(fd - rev) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = name + "[" + std::to_string(i) + "] fd=" +
                       std::to_string(fd) + " rev=" + std::to_string(rev);
      }
    }
  }
  return result;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = lo + (hi - lo) * rng.uniform01();
  }
  return t;
}

/// Fixed linear functional: turns a tensor output into a scalar loss with
/// generically nonzero gradients. The weights must be drawn once per check
/// (not per forward evaluation) or the finite differences see different
/// loss functions on each call.
inline Tensor loss_weights(Shape shape, Rng& rng) {
  Tensor weights(std::move(shape));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = 0.25 + rng.uniform01();  // bounded away from zero
  }
  return weights;
}

inline Var weighted_sum(Tape& tape, Var out, const Tensor& weights) {
  return tape.sum_all(tape.mul(out, tape.constant(weights)));
}

/// Finite-difference check of a whole model's unrolled episode pass against
/// the reverse pass, over every trainable scalar. Perturbs the parameter
/// store in place (restored afterwards). The episode RNG is re-seeded per
/// evaluation so sampling schemes see identical draws. The scalar loss is a
/// fixed weighted sum over every logit: it reaches every parameter through
/// every timestep and keeps gradients clear of the finite-difference noise
/// floor, which a heavily normalized mean loss does not.
inline GradCheckResult model_gradcheck(Model& model, const Episode& episode,
                                       double h = 1e-5) {
  Rng weight_rng(4242);
  const Tensor weights =
      loss_weights({episode.steps(), model.output_dim()}, weight_rng);

  auto loss_of = [&](Tape& tape, Var logits) {
    return tape.scale_const(weighted_sum(tape, logits, weights),
                            1.0 / static_cast<double>(weights.size()));
  };
  auto eval = [&]() {
    Tape tape;
    Bindings bindings = bind(tape, model.params());
    Rng rng(777);
    Var logits = model.build_episode(tape, bindings, episode, rng);
    return tape.value(loss_of(tape, logits))[0];
  };

  Gradients grads;
  {
    Tape tape;
    Bindings bindings = bind(tape, model.params());
    Rng rng(777);
    Var logits = model.build_episode(tape, bindings, episode, rng);
    grads = tape.backward(loss_of(tape, logits));
  }

  GradCheckResult result;
  ParameterStore& store = model.params();
  for (const std::string& name : store.names()) {
    Tensor& p = store.value(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double fp = eval();
      p[i] = keep - h;
      const double fm = eval();
      p[i] = keep;

      const double fd = (fp - fm) / (2.0 * h);
      const double rev = grads.at(name)[i];
      const double denom = std::max({std::fabs(fd), std::fabs(rev), 1e-8});
      const double rel = std::fabs(fd - rev) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = name + "[" + std::to_string(i) + "] fd=" +
                       std::to_string(fd) + " rev=" + std::to_string(rev);
      }
    }
  }
  return result;
}

}  // namespace ntmlab::testing
