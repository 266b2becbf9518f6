#include "ntmlab/tasks.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ntmlab {

std::string task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kRepeatCopy:
      return "repeat_copy";
    case TaskKind::kAssociativeRecall:
      return "associative_recall";
  }
  throw std::logic_error("task_name: bad kind");
}

TaskKind task_from_name(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "repeat_copy") return TaskKind::kRepeatCopy;
  if (name == "associative_recall") return TaskKind::kAssociativeRecall;
  throw std::invalid_argument("unknown task: " + name);
}

std::size_t TaskConfig::input_dim() const {
  switch (kind) {
    case TaskKind::kCopy:
      return bits + 1;  // payload + delimiter
    case TaskKind::kRepeatCopy:
      return bits + 2;  // payload + delimiter + repeat scalar
    case TaskKind::kAssociativeRecall:
      return bits + 2;  // payload + item delimiter + query delimiter
  }
  throw std::logic_error("input_dim: bad kind");
}

std::size_t TaskConfig::output_dim() const {
  switch (kind) {
    case TaskKind::kCopy:
      return bits;
    case TaskKind::kRepeatCopy:
      return bits + 1;  // payload + end marker
    case TaskKind::kAssociativeRecall:
      return bits;
  }
  throw std::logic_error("output_dim: bad kind");
}

void TaskConfig::validate() const {
  if (bits < 1) throw std::invalid_argument("task: bits must be >= 1");
  if (len_min < 1 || len_min > len_max) {
    throw std::invalid_argument("task: bad length range");
  }
  if (repeat_min < 1 || repeat_min > repeat_max) {
    throw std::invalid_argument("task: bad repeat range");
  }
  if (items_min < 2 || items_min > items_max) {
    throw std::invalid_argument("task: item range must start at >= 2");
  }
}

TaskConfig TaskConfig::defaults(TaskKind kind) {
  TaskConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case TaskKind::kCopy:
      cfg.bits = 8;
      cfg.len_min = 1;
      cfg.len_max = 20;
      break;
    case TaskKind::kRepeatCopy:
      cfg.bits = 8;
      cfg.len_min = 1;
      cfg.len_max = 10;
      break;
    case TaskKind::kAssociativeRecall:
      cfg.bits = 6;
      break;
  }
  return cfg;
}

std::size_t Episode::masked_steps() const {
  std::size_t n = 0;
  for (std::uint8_t m : mask) n += m;
  return n;
}

Episode generate_episode(const TaskConfig& cfg, Rng& rng) {
  switch (cfg.kind) {
    case TaskKind::kCopy:
      return gen_copy(cfg, rng);
    case TaskKind::kRepeatCopy:
      return gen_repeat_copy(cfg, rng);
    case TaskKind::kAssociativeRecall:
      return gen_associative_recall(cfg, rng);
  }
  throw std::logic_error("generate_episode: bad kind");
}

Episode gen_copy(const TaskConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t len = rng.uniform_int(cfg.len_min, cfg.len_max);
  const std::size_t steps = 2 * len + 1;
  const std::size_t din = cfg.input_dim();

  Episode ep;
  ep.inputs = Tensor({steps, din});
  ep.targets = Tensor({steps, cfg.bits});
  ep.mask.assign(steps, 0);
  ep.meta.task = task_name(cfg.kind);
  ep.meta.length = len;

  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t b = 0; b < cfg.bits; ++b) {
      const double bit = rng.bernoulli_bit();
      ep.inputs.at(t, b) = bit;
      ep.targets.at(len + 1 + t, b) = bit;
    }
  }
  ep.inputs.at(len, cfg.bits) = 1.0;  // delimiter
  for (std::size_t t = len + 1; t < steps; ++t) ep.mask[t] = 1;
  return ep;
}

Episode gen_repeat_copy(const TaskConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t len = rng.uniform_int(cfg.len_min, cfg.len_max);
  const std::size_t repeats = rng.uniform_int(cfg.repeat_min, cfg.repeat_max);
  const std::size_t steps = len + 1 + repeats * len;
  const std::size_t din = cfg.input_dim();
  const std::size_t dout = cfg.output_dim();

  Episode ep;
  ep.inputs = Tensor({steps, din});
  ep.targets = Tensor({steps, dout});
  ep.mask.assign(steps, 0);
  ep.meta.task = task_name(cfg.kind);
  ep.meta.length = len;
  ep.meta.repeats = repeats;

  std::vector<double> payload(len * cfg.bits);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t b = 0; b < cfg.bits; ++b) {
      const double bit = rng.bernoulli_bit();
      payload[t * cfg.bits + b] = bit;
      ep.inputs.at(t, b) = bit;
    }
  }
  // The step after the payload raises the delimiter flag and carries the
  // repeat count normalized to (0, 1] on its own channel.
  ep.inputs.at(len, cfg.bits) = 1.0;
  ep.inputs.at(len, cfg.bits + 1) =
      static_cast<double>(repeats) / static_cast<double>(cfg.repeat_max);

  const std::size_t answer_start = len + 1;
  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = answer_start + r * len + t;
      for (std::size_t b = 0; b < cfg.bits; ++b) {
        ep.targets.at(row, b) = payload[t * cfg.bits + b];
      }
      ep.mask[row] = 1;
    }
  }
  ep.targets.at(steps - 1, cfg.bits) = 1.0;  // end marker on the final answer step
  return ep;
}

Episode gen_associative_recall(const TaskConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t items = rng.uniform_int(cfg.items_min, cfg.items_max);
  constexpr std::size_t kItemRows = 3;
  const std::size_t steps = items * (kItemRows + 1) + 2 * (kItemRows + 1);
  const std::size_t din = cfg.input_dim();
  const std::size_t item_delim = cfg.bits;
  const std::size_t query_delim = cfg.bits + 1;

  Episode ep;
  ep.inputs = Tensor({steps, din});
  ep.targets = Tensor({steps, cfg.bits});
  ep.mask.assign(steps, 0);
  ep.meta.task = task_name(cfg.kind);
  ep.meta.items = items;

  std::vector<double> payload(items * kItemRows * cfg.bits);
  std::size_t row = 0;
  for (std::size_t item = 0; item < items; ++item) {
    ep.inputs.at(row++, item_delim) = 1.0;
    for (std::size_t r = 0; r < kItemRows; ++r, ++row) {
      for (std::size_t b = 0; b < cfg.bits; ++b) {
        const double bit = rng.bernoulli_bit();
        payload[(item * kItemRows + r) * cfg.bits + b] = bit;
        ep.inputs.at(row, b) = bit;
      }
    }
  }

  // Query: an item drawn from all but the last; the answer is its successor.
  const std::size_t query = rng.uniform_int(0, items - 2);
  ep.inputs.at(row++, query_delim) = 1.0;
  for (std::size_t r = 0; r < kItemRows; ++r, ++row) {
    for (std::size_t b = 0; b < cfg.bits; ++b) {
      ep.inputs.at(row, b) = payload[(query * kItemRows + r) * cfg.bits + b];
    }
  }
  ep.inputs.at(row++, query_delim) = 1.0;

  const std::size_t answer = query + 1;
  for (std::size_t r = 0; r < kItemRows; ++r, ++row) {
    for (std::size_t b = 0; b < cfg.bits; ++b) {
      ep.targets.at(row, b) = payload[(answer * kItemRows + r) * cfg.bits + b];
    }
    ep.mask[row] = 1;
  }
  return ep;
}

std::string episode_to_json_line(const Episode& ep) {
  nlohmann::json j;
  j["task"] = ep.meta.task;
  j["seed"] = ep.meta.seed;
  nlohmann::json meta;
  if (ep.meta.length) meta["length"] = ep.meta.length;
  if (ep.meta.repeats) meta["repeats"] = ep.meta.repeats;
  if (ep.meta.items) meta["items"] = ep.meta.items;
  j["meta"] = meta;

  auto rows = [](const Tensor& t) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < t.dim(0); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t k = 0; k < t.dim(1); ++k) row.push_back(t.at(i, k));
      out.push_back(std::move(row));
    }
    return out;
  };
  j["inputs"] = rows(ep.inputs);
  j["targets"] = rows(ep.targets);
  j["mask"] = ep.mask;
  return j.dump();
}

}  // namespace ntmlab
