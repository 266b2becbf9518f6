#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntmlab/rng.hpp"
#include "ntmlab/tensor.hpp"

namespace ntmlab {

enum class TaskKind { kCopy, kRepeatCopy, kAssociativeRecall };

std::string task_name(TaskKind kind);
TaskKind task_from_name(const std::string& name);

struct TaskConfig {
  TaskKind kind = TaskKind::kCopy;
  std::size_t bits = 8;  // payload width (6 for associative recall per defaults)
  std::size_t len_min = 1, len_max = 20;        // copy / repeat copy
  std::size_t repeat_min = 1, repeat_max = 10;  // repeat copy
  std::size_t items_min = 2, items_max = 6;     // associative recall

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  void validate() const;

  static TaskConfig defaults(TaskKind kind);
};

struct EpisodeMeta {
  std::string task;
  std::size_t length = 0;   // payload length (copy, repeat copy)
  std::size_t repeats = 0;  // repeat copy
  std::size_t items = 0;    // associative recall
  std::uint64_t seed = 0;   // generator seed when generated standalone
};

/// One task instance. inputs is {T, D_in}, targets {T, D_out}; mask marks
/// the steps whose targets contribute to the loss.
struct Episode {
  Tensor inputs;
  Tensor targets;
  std::vector<std::uint8_t> mask;
  EpisodeMeta meta;

  std::size_t steps() const { return mask.size(); }
  std::size_t masked_steps() const;
};

/// Draws one episode from the stream. Generators are pure functions of the
/// stream state, so a fixed seed reproduces the episode bit for bit.
Episode generate_episode(const TaskConfig& cfg, Rng& rng);

Episode gen_copy(const TaskConfig& cfg, Rng& rng);
Episode gen_repeat_copy(const TaskConfig& cfg, Rng& rng);
Episode gen_associative_recall(const TaskConfig& cfg, Rng& rng);

/// One-line JSON record (meta + dense row lists) for the debug dump format.
std::string episode_to_json_line(const Episode& episode);

}  // namespace ntmlab
