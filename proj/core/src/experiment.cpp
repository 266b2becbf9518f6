#include "ntmlab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "ntmlab/checkpoint.hpp"
#include "ntmlab/lstm.hpp"

namespace ntmlab {

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::kNtm ? "ntm" : "lstm";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "ntm") return ModelKind::kNtm;
  if (name == "lstm") return ModelKind::kLstm;
  throw std::invalid_argument("unknown model: " + name);
}

void ExperimentSpec::validate() const {
  task.validate();
  if (model == ModelKind::kLstm && init_scheme_set) {
    throw std::invalid_argument("init_scheme is only valid with model=ntm");
  }
  if (model == ModelKind::kNtm && !init_scheme_set) {
    throw std::invalid_argument("model=ntm requires an init_scheme");
  }
  if (num_runs < 1) throw std::invalid_argument("num_runs must be >= 1");
  if (model == ModelKind::kNtm) ntm.validate();
  TrainConfig tc = train;
  tc.task = task;
  tc.validate();
}

void apply_preset(ExperimentSpec& spec, const std::string& name) {
  if (name == "paper") {
    spec.task = TaskConfig::defaults(spec.task.kind);
    spec.ntm.memory_rows = 128;
    spec.ntm.memory_width = 20;
    spec.controller_units = 100;
    spec.controller_layers = 1;
    spec.lstm_units = 256;
    spec.lstm_layers = 3;
    spec.num_runs = 10;
    spec.train.learning_rate = 0.001;
    spec.train.max_grad_norm = 50.0;
    spec.train.batch_size = 32;
    spec.train.total_steps = 50000;
    spec.train.eval_every = 200;
    spec.train.eval_examples = 640;
  } else if (name == "desk") {
    spec.task = TaskConfig::defaults(spec.task.kind);
    spec.task.bits = 4;
    spec.task.len_min = 1;
    spec.task.len_max = 5;
    spec.task.repeat_max = 5;
    spec.task.items_max = 4;
    spec.ntm.memory_rows = 32;
    spec.ntm.memory_width = 12;
    spec.controller_units = 64;
    spec.controller_layers = 1;
    spec.lstm_units = 64;
    spec.lstm_layers = 2;
    spec.num_runs = 5;
    spec.train.learning_rate = 0.001;
    spec.train.max_grad_norm = 50.0;
    spec.train.batch_size = 16;
    spec.train.total_steps = 20000;
    spec.train.eval_every = 200;
    spec.train.eval_examples = 640;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::uint64_t v = std::stoull(value, &pos);
  if (pos != value.size()) throw std::invalid_argument(key + ": bad integer " + value);
  return v;
}

double parse_f64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = std::stod(value, &pos);
  if (pos != value.size()) throw std::invalid_argument(key + ": bad number " + value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument(key + ": bad bool " + value);
}

std::string f64_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_key_value(ExperimentSpec& spec, const std::string& key,
                     const std::string& value) {
  if (key == "task") {
    const TaskKind kind = task_from_name(value);
    const TaskConfig keep = spec.task;
    spec.task = TaskConfig::defaults(kind);
    // Ranges set before the task key keep their values only when explicitly
    // reapplied; defaults per task are authoritative here.
    (void)keep;
  } else if (key == "model") {
    spec.model = model_kind_from_name(value);
    if (spec.model == ModelKind::kLstm) spec.init_scheme_set = false;
  } else if (key == "init_scheme") {
    spec.init_scheme = init_scheme_from_name(value);
    spec.init_scheme_set = true;
  } else if (key == "runs") {
    spec.num_runs = parse_u64(key, value);
  } else if (key == "base_seed") {
    spec.base_seed = parse_u64(key, value);
  } else if (key == "out_dir") {
    spec.out_dir = value;
  } else if (key == "jobs") {
    spec.jobs = parse_u64(key, value);
  } else if (key == "bits") {
    spec.task.bits = parse_u64(key, value);
  } else if (key == "len_min") {
    spec.task.len_min = parse_u64(key, value);
  } else if (key == "len_max") {
    spec.task.len_max = parse_u64(key, value);
  } else if (key == "repeat_min") {
    spec.task.repeat_min = parse_u64(key, value);
  } else if (key == "repeat_max") {
    spec.task.repeat_max = parse_u64(key, value);
  } else if (key == "items_min") {
    spec.task.items_min = parse_u64(key, value);
  } else if (key == "items_max") {
    spec.task.items_max = parse_u64(key, value);
  } else if (key == "memory_rows") {
    spec.ntm.memory_rows = parse_u64(key, value);
  } else if (key == "memory_width") {
    spec.ntm.memory_width = parse_u64(key, value);
  } else if (key == "read_heads") {
    spec.ntm.num_read_heads = parse_u64(key, value);
  } else if (key == "write_heads") {
    spec.ntm.num_write_heads = parse_u64(key, value);
  } else if (key == "shift_range") {
    spec.ntm.shift_range = parse_u64(key, value);
  } else if (key == "clip_bound") {
    spec.ntm.clip_bound = parse_f64(key, value);
  } else if (key == "clip_hidden") {
    spec.ntm.clip_hidden = parse_bool(key, value);
  } else if (key == "controller_units") {
    spec.controller_units = parse_u64(key, value);
  } else if (key == "controller_layers") {
    spec.controller_layers = parse_u64(key, value);
  } else if (key == "lstm_units") {
    spec.lstm_units = parse_u64(key, value);
  } else if (key == "lstm_layers") {
    spec.lstm_layers = parse_u64(key, value);
  } else if (key == "learning_rate") {
    spec.train.learning_rate = parse_f64(key, value);
  } else if (key == "max_grad_norm") {
    spec.train.max_grad_norm = parse_f64(key, value);
  } else if (key == "batch_size") {
    spec.train.batch_size = parse_u64(key, value);
  } else if (key == "total_steps") {
    spec.train.total_steps = parse_u64(key, value);
  } else if (key == "eval_every") {
    spec.train.eval_every = parse_u64(key, value);
  } else if (key == "eval_examples") {
    spec.train.eval_examples = parse_u64(key, value);
  } else if (key == "stop_below_bits") {
    spec.train.stop_below_bits = parse_f64(key, value);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

void apply_config_file(ExperimentSpec& spec, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_key_value(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string spec_to_key_values(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "task=" << task_name(spec.task.kind) << "\n";
  os << "model=" << model_kind_name(spec.model) << "\n";
  if (spec.init_scheme_set) {
    os << "init_scheme=" << init_scheme_name(spec.init_scheme) << "\n";
  }
  os << "runs=" << spec.num_runs << "\n";
  os << "base_seed=" << spec.base_seed << "\n";
  os << "bits=" << spec.task.bits << "\n";
  os << "len_min=" << spec.task.len_min << "\n";
  os << "len_max=" << spec.task.len_max << "\n";
  os << "repeat_min=" << spec.task.repeat_min << "\n";
  os << "repeat_max=" << spec.task.repeat_max << "\n";
  os << "items_min=" << spec.task.items_min << "\n";
  os << "items_max=" << spec.task.items_max << "\n";
  os << "memory_rows=" << spec.ntm.memory_rows << "\n";
  os << "memory_width=" << spec.ntm.memory_width << "\n";
  os << "read_heads=" << spec.ntm.num_read_heads << "\n";
  os << "write_heads=" << spec.ntm.num_write_heads << "\n";
  os << "shift_range=" << spec.ntm.shift_range << "\n";
  os << "clip_bound=" << f64_str(spec.ntm.clip_bound) << "\n";
  os << "clip_hidden=" << (spec.ntm.clip_hidden ? "true" : "false") << "\n";
  os << "controller_units=" << spec.controller_units << "\n";
  os << "controller_layers=" << spec.controller_layers << "\n";
  os << "lstm_units=" << spec.lstm_units << "\n";
  os << "lstm_layers=" << spec.lstm_layers << "\n";
  os << "learning_rate=" << f64_str(spec.train.learning_rate) << "\n";
  os << "max_grad_norm=" << f64_str(spec.train.max_grad_norm) << "\n";
  os << "batch_size=" << spec.train.batch_size << "\n";
  os << "total_steps=" << spec.train.total_steps << "\n";
  os << "eval_every=" << spec.train.eval_every << "\n";
  os << "eval_examples=" << spec.train.eval_examples << "\n";
  os << "stop_below_bits=" << f64_str(spec.train.stop_below_bits) << "\n";
  return os.str();
}

ExperimentSpec spec_from_key_values(const std::string& text) {
  ExperimentSpec spec;
  spec.init_scheme_set = false;
  std::istringstream in(text);
  std::string line;
  // The task key resets ranges to task defaults, so apply it first, then
  // replay every key in order.
  std::vector<std::pair<std::string, std::string>> pairs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("spec echo: expected key=value, got " + line);
    }
    pairs.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  for (const auto& [key, value] : pairs) {
    if (key == "task") apply_key_value(spec, key, value);
  }
  for (const auto& [key, value] : pairs) {
    if (key != "task") apply_key_value(spec, key, value);
  }
  return spec;
}

std::unique_ptr<Model> make_model(const ExperimentSpec& spec,
                                  std::uint64_t run_seed) {
  const std::size_t in = spec.task.input_dim();
  const std::size_t out = spec.task.output_dim();
  if (spec.model == ModelKind::kNtm) {
    NtmConfig cfg = spec.ntm;
    cfg.init_scheme = spec.init_scheme;
    return std::make_unique<NtmModel>(cfg, spec.controller_units,
                                      spec.controller_layers, in, out,
                                      model_init_seed(run_seed));
  }
  return std::make_unique<LstmBaselineModel>(spec.lstm_layers, spec.lstm_units, in,
                                             out, model_init_seed(run_seed));
}

std::string curve_csv_header() {
  return "step,run_id,task,model,init_scheme,seed,val_loss,val_bits_per_seq,"
         "wall_ms";
}

std::string curve_csv_row(const CurvePoint& point, const ExperimentSpec& spec,
                          std::size_t run_id, std::uint64_t seed) {
  std::ostringstream os;
  os << point.step << ',' << run_id << ',' << task_name(spec.task.kind) << ','
     << model_kind_name(spec.model) << ','
     << (spec.init_scheme_set ? init_scheme_name(spec.init_scheme) : "") << ','
     << seed << ',' << f64_str(point.val_loss) << ','
     << f64_str(point.val_bits_per_seq) << ',' << f64_str(point.wall_ms);
  return os.str();
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::size_t steps_to_threshold(const std::vector<CurvePoint>& curve,
                               double threshold, std::size_t never) {
  for (const CurvePoint& p : curve) {
    if (p.val_bits_per_seq < threshold) return p.step;
  }
  return never;
}

namespace {

std::size_t job_limit(const ExperimentSpec& spec) {
  std::size_t jobs = spec.jobs;
  if (jobs == 0) {
    jobs = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }
  if (const char* cap = std::getenv("NTM_LAB_THREADS")) {
    const std::size_t limit = std::strtoull(cap, nullptr, 10);
    if (limit >= 1) jobs = std::min(jobs, limit);
  }
  return std::min(jobs, spec.num_runs);
}

RunOutcome execute_run(const ExperimentSpec& spec, std::size_t run_id) {
  RunOutcome outcome;
  outcome.run_id = run_id;
  outcome.seed = spec.base_seed + run_id;

  std::unique_ptr<Model> model = make_model(spec, outcome.seed);
  TrainConfig cfg = spec.train;
  cfg.task = spec.task;
  cfg.seed = outcome.seed;
  TrainerState state = make_trainer_state(*model, cfg);

  const std::filesystem::path dir(spec.out_dir);
  outcome.curve_path = (dir / ("run_" + std::to_string(run_id) + ".csv")).string();
  outcome.checkpoint_path =
      (dir / ("run_" + std::to_string(run_id) + ".ckpt")).string();

  std::ofstream csv(outcome.curve_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + outcome.curve_path);
  csv << curve_csv_header() << "\n" << std::flush;

  const CurveSink sink = [&](const CurvePoint& point) {
    csv << curve_csv_row(point, spec, run_id, outcome.seed) << "\n" << std::flush;
  };

  TrainReport report = train(*model, cfg, state, sink);
  outcome.curve = std::move(report.curve);
  outcome.failed = report.aborted;
  outcome.diagnostic = report.abort_diagnostic;
  if (!report.aborted) {
    Checkpoint ckpt = make_checkpoint(spec_to_key_values(spec), *model, state);
    ckpt.strings["run/id"] = std::to_string(run_id);
    save_checkpoint(ckpt, outcome.checkpoint_path);
  }
  return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);

  ExperimentResult result;
  result.runs.resize(spec.num_runs);

  const std::size_t jobs = job_limit(spec);
  std::mutex next_mutex;
  std::size_t next_run = 0;
  std::vector<std::thread> workers;
  std::vector<std::string> errors(spec.num_runs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        std::size_t run_id;
        {
          std::lock_guard<std::mutex> lock(next_mutex);
          if (next_run >= spec.num_runs) return;
          run_id = next_run++;
        }
        try {
          result.runs[run_id] = execute_run(spec, run_id);
        } catch (const std::exception& err) {
          result.runs[run_id].run_id = run_id;
          result.runs[run_id].failed = true;
          result.runs[run_id].diagnostic = err.what();
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();

  for (const RunOutcome& run : result.runs) {
    if (run.failed) result.all_ok = false;
  }

  // Median aggregate over the runs alive at each step.
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> rows;
  for (const RunOutcome& run : result.runs) {
    for (const CurvePoint& p : run.curve) {
      rows[p.step].first.push_back(p.val_bits_per_seq);
      rows[p.step].second.push_back(p.val_loss);
    }
  }
  result.aggregate_path =
      (std::filesystem::path(spec.out_dir) / "aggregate.csv").string();
  std::ofstream agg(result.aggregate_path, std::ios::trunc);
  if (!agg) throw std::runtime_error("cannot write " + result.aggregate_path);
  agg << "step,median_val_bits_per_seq,median_val_loss,runs_alive\n";
  for (const auto& [step, metrics] : rows) {
    agg << step << ',' << f64_str(median(metrics.first)) << ','
        << f64_str(median(metrics.second)) << ',' << metrics.first.size() << "\n";
  }
  return result;
}

}  // namespace ntmlab
