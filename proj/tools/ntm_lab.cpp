// ntm-lab: experiment runner for the NTM lab.
//
//   ntm-lab train --task copy --model ntm --init constant --runs 10 \
//           --preset paper --out results/copy_constant
//   ntm-lab eval  --checkpoint results/copy_constant/run_0.ckpt --examples 640
//   ntm-lab gen   --task repeat_copy --seed 7 --out episodes.jsonl
//
// Configuration is a flat key=value file (--config); command-line flags win
// over config values, which win over the preset.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntmlab/checkpoint.hpp"
#include "ntmlab/experiment.hpp"
#include "ntmlab/tasks.hpp"

namespace {

using namespace ntmlab;

struct FlagSet {
  std::vector<std::pair<std::string, std::string>> pairs;

  void add_option(CLI::App* cmd, const std::string& flag, const std::string& key,
                  const std::string& help) {
    cmd->add_option_function<std::string>(
        flag,
        [this, key](const std::string& value) { pairs.emplace_back(key, value); },
        help);
  }
};

void add_spec_flags(CLI::App* cmd, FlagSet& flags) {
  flags.add_option(cmd, "--task", "task", "copy | repeat_copy | associative_recall");
  flags.add_option(cmd, "--model", "model", "ntm | lstm");
  flags.add_option(cmd, "--init", "init_scheme", "constant | learned | random");
  flags.add_option(cmd, "--runs", "runs", "number of training runs");
  flags.add_option(cmd, "--jobs", "jobs", "parallel runs (capped by NTM_LAB_THREADS)");
  flags.add_option(cmd, "--bits", "bits", "payload width");
  flags.add_option(cmd, "--len-min", "len_min", "minimum sequence length");
  flags.add_option(cmd, "--len-max", "len_max", "maximum sequence length");
  flags.add_option(cmd, "--repeat-min", "repeat_min", "minimum repeat count");
  flags.add_option(cmd, "--repeat-max", "repeat_max", "maximum repeat count");
  flags.add_option(cmd, "--items-min", "items_min", "minimum item count");
  flags.add_option(cmd, "--items-max", "items_max", "maximum item count");
  flags.add_option(cmd, "--memory-rows", "memory_rows", "memory locations N");
  flags.add_option(cmd, "--memory-width", "memory_width", "memory cell width W");
  flags.add_option(cmd, "--read-heads", "read_heads", "number of read heads");
  flags.add_option(cmd, "--write-heads", "write_heads", "number of write heads");
  flags.add_option(cmd, "--shift-range", "shift_range", "shift kernel size (odd)");
  flags.add_option(cmd, "--clip-bound", "clip_bound", "controller output clip");
  flags.add_option(cmd, "--clip-hidden", "clip_hidden",
                   "also clip the controller hidden vector (true/false)");
  flags.add_option(cmd, "--controller", "controller_units", "controller LSTM units");
  flags.add_option(cmd, "--controller-layers", "controller_layers",
                   "controller LSTM layers");
  flags.add_option(cmd, "--lstm-units", "lstm_units", "baseline LSTM units");
  flags.add_option(cmd, "--lstm-layers", "lstm_layers", "baseline LSTM layers");
  flags.add_option(cmd, "--lr", "learning_rate", "Adam learning rate");
  flags.add_option(cmd, "--max-grad-norm", "max_grad_norm", "global norm clip");
  flags.add_option(cmd, "--batch", "batch_size", "episodes per training step");
  flags.add_option(cmd, "--steps", "total_steps", "training steps");
  flags.add_option(cmd, "--eval-every", "eval_every", "steps between evaluations");
  flags.add_option(cmd, "--eval-examples", "eval_examples", "validation episodes");
  flags.add_option(cmd, "--stop-below-bits", "stop_below_bits",
                   "early stop once validation bits/seq drops below this");
}

ExperimentSpec build_spec(const std::string& preset, const std::string& config,
                          const FlagSet& flags) {
  ExperimentSpec spec;
  if (!preset.empty()) apply_preset(spec, preset);
  if (!config.empty()) apply_config_file(spec, config);
  // Apply the task flag before the others: selecting a task resets its
  // ranges to that task's defaults.
  for (const auto& [key, value] : flags.pairs) {
    if (key == "task") apply_key_value(spec, key, value);
  }
  for (const auto& [key, value] : flags.pairs) {
    if (key != "task") apply_key_value(spec, key, value);
  }
  return spec;
}

int cmd_train(const std::string& preset, const std::string& config,
              const FlagSet& flags, const std::string& out_dir) {
  ExperimentSpec spec = build_spec(preset, config, flags);
  if (!out_dir.empty()) spec.out_dir = out_dir;
  spec.validate();

  const ExperimentResult result = run_experiment(spec);
  for (const RunOutcome& run : result.runs) {
    if (run.failed) {
      std::cout << "run " << run.run_id << " FAILED: " << run.diagnostic << "\n";
    } else {
      std::cout << "run " << run.run_id << " done: " << run.curve.size()
                << " curve points, checkpoint " << run.checkpoint_path << "\n";
    }
  }
  std::cout << "aggregate: " << result.aggregate_path << "\n";
  return result.all_ok ? 0 : 1;
}

int cmd_resume(const std::string& checkpoint_path, const FlagSet& flags,
               const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ExperimentSpec spec = spec_from_key_values(ckpt.spec_echo());
  for (const auto& [key, value] : flags.pairs) apply_key_value(spec, key, value);
  if (!out_dir.empty()) spec.out_dir = out_dir;
  spec.validate();

  const std::size_t run_id = std::stoull(ckpt.strings.at("run/id"));
  const std::uint64_t seed = spec.base_seed + run_id;
  auto model = make_model(spec, seed);
  TrainerState state = apply_checkpoint(ckpt, *model);

  TrainConfig cfg = spec.train;
  cfg.task = spec.task;
  cfg.seed = seed;

  std::filesystem::create_directories(spec.out_dir);
  const auto dir = std::filesystem::path(spec.out_dir);
  const std::string curve_path =
      (dir / ("run_" + std::to_string(run_id) + ".csv")).string();
  const bool fresh = !std::filesystem::exists(curve_path);
  std::ofstream csv(curve_path, std::ios::app);
  if (!csv) throw std::runtime_error("cannot write " + curve_path);
  if (fresh) csv << curve_csv_header() << "\n" << std::flush;
  const CurveSink sink = [&](const CurvePoint& point) {
    csv << curve_csv_row(point, spec, run_id, seed) << "\n" << std::flush;
  };

  TrainReport report = train(*model, cfg, state, sink);
  if (report.aborted) {
    std::cout << "run " << run_id << " FAILED: " << report.abort_diagnostic << "\n";
    return 1;
  }
  Checkpoint final_ckpt = make_checkpoint(spec_to_key_values(spec), *model, state);
  final_ckpt.strings["run/id"] = std::to_string(run_id);
  const std::string ckpt_path =
      (dir / ("run_" + std::to_string(run_id) + ".ckpt")).string();
  save_checkpoint(final_ckpt, ckpt_path);
  std::cout << "run " << run_id << " resumed to step " << report.final_step
            << ", checkpoint " << ckpt_path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, std::size_t examples,
             std::uint64_t seed, const std::string& task_override) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ExperimentSpec spec = spec_from_key_values(ckpt.spec_echo());
  if (!task_override.empty()) apply_key_value(spec, "task", task_override);

  const std::size_t run_id =
      ckpt.strings.count("run/id") ? std::stoull(ckpt.strings.at("run/id")) : 0;
  auto model = make_model(spec, spec.base_seed + run_id);
  apply_checkpoint(ckpt, *model);

  const EvalResult result = evaluate(*model, spec.task, examples, seed);
  std::cout << "examples=" << examples << " val_loss=" << result.loss
            << " val_bits_per_seq=" << result.bits_per_seq << "\n";
  return 0;
}

int cmd_gen(const std::string& preset, const FlagSet& flags, std::uint64_t seed,
            std::size_t count, const std::string& out_path) {
  ExperimentSpec spec = build_spec(preset, "", flags);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed + i);
    Episode ep = generate_episode(spec.task, rng);
    ep.meta.seed = seed + i;
    out << episode_to_json_line(ep) << "\n";
  }
  std::cout << "wrote " << count << " episodes to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Turing Machine lab"};
  app.require_subcommand(1);

  std::string preset, config, out_dir, checkpoint_path, task_override;
  std::uint64_t eval_seed = 1000003;
  std::uint64_t gen_seed = 0;
  std::size_t examples = 640;
  std::size_t gen_count = 10;
  std::string gen_out = "episodes.jsonl";

  FlagSet train_flags, resume_flags, gen_flags;

  CLI::App* train_cmd = app.add_subcommand("train", "run a training experiment");
  train_cmd->add_option("--preset", preset, "paper | desk");
  train_cmd->add_option("--config", config, "flat key=value config file");
  train_cmd->add_option("--out", out_dir, "output directory");
  train_flags.add_option(train_cmd, "--seed", "base_seed",
                         "base seed; run i uses base_seed + i");
  add_spec_flags(train_cmd, train_flags);

  CLI::App* resume_cmd =
      app.add_subcommand("resume", "continue a single run from a checkpoint");
  resume_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  resume_cmd->add_option("--out", out_dir, "output directory");
  resume_flags.add_option(resume_cmd, "--seed", "base_seed",
                          "base seed; run i uses base_seed + i");
  add_spec_flags(resume_cmd, resume_flags);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  eval_cmd->add_option("--examples", examples, "validation episodes");
  eval_cmd->add_option("--seed", eval_seed, "evaluation stream seed");
  eval_cmd->add_option("--task", task_override, "override the checkpoint task");

  CLI::App* gen_cmd = app.add_subcommand("gen", "dump episodes as JSONL");
  gen_cmd->add_option("--preset", preset, "paper | desk");
  gen_cmd->add_option("--seed", gen_seed, "episode i uses seed + i");
  gen_cmd->add_option("--count", gen_count, "episodes to generate");
  gen_cmd->add_option("--out", gen_out, "output JSONL path");
  add_spec_flags(gen_cmd, gen_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(preset, config, train_flags, out_dir);
    if (resume_cmd->parsed()) return cmd_resume(checkpoint_path, resume_flags, out_dir);
    if (eval_cmd->parsed()) {
      return cmd_eval(checkpoint_path, examples, eval_seed, task_override);
    }
    if (gen_cmd->parsed()) {
      return cmd_gen(preset, gen_flags, gen_seed, gen_count, gen_out);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
