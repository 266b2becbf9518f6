#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ntmlab/checkpoint.hpp"
#include "ntmlab/experiment.hpp"
#include "ntmlab/lstm.hpp"
#include "ntmlab/training.hpp"

using namespace ntmlab;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

TaskConfig tiny_task() {
  TaskConfig task = TaskConfig::defaults(TaskKind::kCopy);
  task.bits = 3;
  task.len_max = 2;
  return task;
}

TrainConfig tiny_train(const TaskConfig& task) {
  TrainConfig cfg;
  cfg.task = task;
  cfg.batch_size = 2;
  cfg.total_steps = 50;
  cfg.eval_every = 10;
  cfg.eval_examples = 4;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("save and load round-trip bit-exactly") {
  TaskConfig task = tiny_task();
  LstmBaselineModel model(2, 5, task.input_dim(), task.output_dim(), 4);
  TrainConfig cfg = tiny_train(task);
  TrainerState state = make_trainer_state(model, cfg);
  state.step = 123;
  state.train_stream.next_u64();  // advance the streams off their seeds
  state.val_stream.next_u64();
  state.val_stream.next_u64();

  Checkpoint out = make_checkpoint("model=lstm\n", model, state);
  const auto path = temp_path("ntmlab_ckpt_roundtrip.ckpt");
  save_checkpoint(out, path.string());
  Checkpoint in = load_checkpoint(path.string());

  CHECK(in.version == out.version);
  CHECK(in.spec_echo() == "model=lstm\n");
  CHECK(in.step() == 123);
  REQUIRE(in.tensors.size() == out.tensors.size());
  for (const auto& [name, tensor] : out.tensors) {
    REQUIRE(in.tensors.count(name) == 1);
    CHECK(in.tensors.at(name) == tensor);
  }
  CHECK(in.strings.at("rng/train") == state.train_stream.serialize());
  CHECK(in.strings.at("rng/val") == state.val_stream.serialize());
  std::filesystem::remove(path);
}

TEST_CASE("corrupt files are rejected without touching any state") {
  const auto path = temp_path("ntmlab_ckpt_corrupt.ckpt");

  SUBCASE("bad magic") {
    std::ofstream(path) << "not a checkpoint at all";
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
  }
  SUBCASE("truncation") {
    TaskConfig task = tiny_task();
    LstmBaselineModel model(1, 4, task.input_dim(), task.output_dim(), 4);
    TrainConfig cfg = tiny_train(task);
    TrainerState state = make_trainer_state(model, cfg);
    save_checkpoint(make_checkpoint("", model, state), path.string());
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
  }
  SUBCASE("version mismatch") {
    TaskConfig task = tiny_task();
    LstmBaselineModel model(1, 4, task.input_dim(), task.output_dim(), 4);
    TrainConfig cfg = tiny_train(task);
    TrainerState state = make_trainer_state(model, cfg);
    Checkpoint ckpt = make_checkpoint("", model, state);
    ckpt.version = 999;
    save_checkpoint(ckpt, path.string());
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
  }
  SUBCASE("missing parameters are caught on apply") {
    TaskConfig task = tiny_task();
    LstmBaselineModel model(1, 4, task.input_dim(), task.output_dim(), 4);
    TrainConfig cfg = tiny_train(task);
    TrainerState state = make_trainer_state(model, cfg);
    Checkpoint ckpt = make_checkpoint("", model, state);
    ckpt.tensors.erase("param/out.b");
    save_checkpoint(ckpt, path.string());
    Checkpoint loaded = load_checkpoint(path.string());
    CHECK_THROWS_AS(apply_checkpoint(loaded, model), CheckpointError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("interrupted and resumed training matches an uninterrupted run") {
  TaskConfig task = tiny_task();
  TrainConfig cfg = tiny_train(task);

  // Uninterrupted 50-step run.
  LstmBaselineModel straight(2, 5, task.input_dim(), task.output_dim(),
                             model_init_seed(cfg.seed));
  TrainerState straight_state = make_trainer_state(straight, cfg);
  std::vector<CurvePoint> straight_curve;
  train(straight, cfg, straight_state,
        [&](const CurvePoint& p) { straight_curve.push_back(p); });

  // Interrupted at 25, checkpointed, resumed in a fresh model instance.
  TrainConfig half = cfg;
  half.total_steps = 25;
  LstmBaselineModel first(2, 5, task.input_dim(), task.output_dim(),
                          model_init_seed(cfg.seed));
  TrainerState first_state = make_trainer_state(first, cfg);
  std::vector<CurvePoint> resumed_curve;
  train(first, half, first_state,
        [&](const CurvePoint& p) { resumed_curve.push_back(p); });

  const auto path = temp_path("ntmlab_ckpt_resume.ckpt");
  save_checkpoint(make_checkpoint("", first, first_state), path.string());

  LstmBaselineModel second(2, 5, task.input_dim(), task.output_dim(),
                           /*different init seed=*/999);
  Checkpoint loaded = load_checkpoint(path.string());
  TrainerState second_state = apply_checkpoint(loaded, second);
  CHECK(second_state.step == 25);
  train(second, cfg, second_state,
        [&](const CurvePoint& p) { resumed_curve.push_back(p); });

  CHECK(straight.params().checksum() == second.params().checksum());
  REQUIRE(straight_curve.size() == resumed_curve.size());
  for (std::size_t i = 0; i < straight_curve.size(); ++i) {
    CHECK(straight_curve[i].step == resumed_curve[i].step);
    // wall_ms is wall-clock and excluded from the equivalence.
    CHECK(straight_curve[i].val_loss == resumed_curve[i].val_loss);
    CHECK(straight_curve[i].val_bits_per_seq == resumed_curve[i].val_bits_per_seq);
  }
  std::filesystem::remove(path);
}

TEST_SUITE_END();
