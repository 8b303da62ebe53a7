#pragma once

#include <memory>
#include <string>

#include "blocksel/rng.hpp"
#include "blocksel/tensor.hpp"

namespace blocksel {

enum class TaskKind { SyntheticCopy, SyntheticModAdd, CharLM };

/// Deterministic batch source. Each call draws the next batch from the
/// task's own RNG stream; targets are the next-token labels for every
/// position.
class Task {
 public:
  virtual ~Task() = default;
  virtual Batch next_batch(int batch_size, int seq_len) = 0;
  virtual std::string describe() const = 0;
};

/// Repeated-prefix sequences: `prefix_len` random tokens followed by their
/// periodic repetition. Every position past the prefix is exactly
/// predictable from `prefix_len` tokens back.
std::unique_ptr<Task> make_copy_task(int vocab_size, int prefix_len, Rng rng);

/// Running modular sums: t[i] = (t[i-1] + t[i-2]) mod vocab with a random
/// two-token start, so every position past the second is predictable.
std::unique_ptr<Task> make_mod_add_task(int vocab_size, Rng rng);

/// Character language modeling over `text` (builtin corpus when empty).
/// Distinct characters are mapped to ids 0..n-1; vocab_size must cover them.
std::unique_ptr<Task> make_char_lm_task(int vocab_size, const std::string& text, Rng rng);

/// Loads `path` (or the builtin corpus when path is empty) and builds the
/// char-LM task. Throws std::runtime_error if the file cannot be read.
std::unique_ptr<Task> make_char_lm_task_from_file(int vocab_size, const std::string& path,
                                                  Rng rng);

}  // namespace blocksel
