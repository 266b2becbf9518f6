#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ntmlab/model.hpp"
#include "ntmlab/ntm.hpp"
#include "ntmlab/tasks.hpp"
#include "ntmlab/training.hpp"

namespace ntmlab {

enum class ModelKind { kNtm, kLstm };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// Full description of one experiment: a task, a model, and the training
/// protocol, executed num_runs times from seeds base_seed + run index.
struct ExperimentSpec {
  TaskConfig task = TaskConfig::defaults(TaskKind::kCopy);
  ModelKind model = ModelKind::kNtm;
  InitScheme init_scheme = InitScheme::kConstant;
  bool init_scheme_set = true;  // must be set iff model == ntm
  std::size_t num_runs = 10;
  std::uint64_t base_seed = 1;

  NtmConfig ntm;
  std::size_t controller_units = 100;
  std::size_t controller_layers = 1;
  std::size_t lstm_units = 256;
  std::size_t lstm_layers = 3;

  TrainConfig train;

  std::string out_dir = "out";
  std::size_t jobs = 0;  // 0 = auto; capped by NTM_LAB_THREADS

  void validate() const;
};

/// paper: the full protocol (128x20 memory, 100-unit controller, 3x256
/// baseline, 8-bit payloads). desk: a small configuration that trains in
/// minutes on one core (32x12 memory, 64-unit controller, 2x64 baseline,
/// 4-bit payloads, short sequences).
void apply_preset(ExperimentSpec& spec, const std::string& name);

/// Flat key=value config handling; unknown keys are errors naming the key.
void apply_key_value(ExperimentSpec& spec, const std::string& key,
                     const std::string& value);
void apply_config_file(ExperimentSpec& spec, const std::string& path);
std::string spec_to_key_values(const ExperimentSpec& spec);
ExperimentSpec spec_from_key_values(const std::string& text);

std::unique_ptr<Model> make_model(const ExperimentSpec& spec,
                                  std::uint64_t run_seed);

struct RunOutcome {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string diagnostic;
  std::vector<CurvePoint> curve;
  std::string curve_path;
  std::string checkpoint_path;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::string aggregate_path;
  bool all_ok = true;
};

/// Executes every run (in parallel up to the jobs bound), writing one curve
/// CSV per run, a final checkpoint per run, and the median aggregate CSV.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// First curve step at which the metric drops below the threshold, or
/// (total steps + 1) if it never does. Used for steps-to-threshold medians.
std::size_t steps_to_threshold(const std::vector<CurvePoint>& curve,
                               double threshold, std::size_t never);

double median(std::vector<double> values);

/// step,run_id,task,model,init_scheme,seed,val_loss,val_bits_per_seq,wall_ms
std::string curve_csv_header();
std::string curve_csv_row(const CurvePoint& point, const ExperimentSpec& spec,
                          std::size_t run_id, std::uint64_t seed);

}  // namespace ntmlab
