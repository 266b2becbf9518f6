#include <benchmark/benchmark.h>

#include "ntmlab/experiment.hpp"
#include "ntmlab/ntm.hpp"
#include "ntmlab/tasks.hpp"
#include "ntmlab/training.hpp"

namespace {

using namespace ntmlab;

ExperimentSpec desk_spec() {
  ExperimentSpec spec;
  apply_preset(spec, "desk");
  return spec;
}

void BM_CopyEpisodeGen(benchmark::State& state) {
  TaskConfig cfg = desk_spec().task;
  Rng rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_copy(cfg, rng));
  }
}
BENCHMARK(BM_CopyEpisodeGen);

void BM_NtmEpisodeForward(benchmark::State& state) {
  const ExperimentSpec spec = desk_spec();
  auto model = make_model(spec, 1);
  TaskConfig task = spec.task;
  Rng rng(7);
  Episode ep = generate_episode(task, rng);
  for (auto _ : state) {
    Tape tape;
    Bindings bindings = bind(tape, model->params());
    benchmark::DoNotOptimize(model->build_episode(tape, bindings, ep, rng));
  }
}
BENCHMARK(BM_NtmEpisodeForward);

void BM_NtmEpisodeForwardBackward(benchmark::State& state) {
  const ExperimentSpec spec = desk_spec();
  auto model = make_model(spec, 1);
  TaskConfig task = spec.task;
  Rng rng(7);
  Episode ep = generate_episode(task, rng);
  for (auto _ : state) {
    Tape tape;
    Bindings bindings = bind(tape, model->params());
    Var logits = model->build_episode(tape, bindings, ep, rng);
    Var loss = masked_bce_loss(tape, logits, ep.targets, ep.mask);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_NtmEpisodeForwardBackward);

void BM_Addressing(benchmark::State& state) {
  const std::size_t rows = 128, width = 20;
  Rng rng(3);
  Tensor memory({rows, width});
  for (std::size_t i = 0; i < memory.size(); ++i) memory[i] = rng.normal(0, 0.5);
  Tensor raw({width + 3 + 3});
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = rng.normal(0, 1.0);
  NtmConfig cfg;
  cfg.memory_rows = rows;
  cfg.memory_width = width;
  for (auto _ : state) {
    Tape tape;
    Var m = tape.constant(memory);
    Var prev = tape.softmax(tape.constant(Tensor({rows})), 0);
    HeadVars head = decode_head_params(tape, tape.constant(raw), false, cfg);
    benchmark::DoNotOptimize(address(tape, m, head, prev));
  }
}
BENCHMARK(BM_Addressing);

}  // namespace

BENCHMARK_MAIN();
