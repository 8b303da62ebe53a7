#include "blocksel/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace blocksel {

namespace {

// Small bundled text so the char-LM task works without any input file.
const char* kBuiltinCorpus =
    "the lighthouse keeper wound the clock at dawn and again at dusk. gulls "
    "circled the tower while the tide drew long lines in the sand. ships "
    "passed far out where the water turns from green to grey, and each one "
    "carried a name she wrote down in the ledger by the lamp. on calm nights "
    "the beam swept the bay in slow circles, touching the pier, the boats, "
    "and the dark hills beyond. in winter the storms came early, and the "
    "keeper counted seconds between flashes of lightning to judge how far "
    "the weather stood from shore. every spring the painters arrived to "
    "whiten the tower walls, and the children from the village raced up the "
    "one hundred and forty steps to see the coast unroll beneath them. the "
    "ledger filled year by year with names, dates, and small notes about "
    "wind and weather, until the shelf held forty volumes and the keeper "
    "started the forty first without ceremony. ";

Batch shift_into_batch(const std::vector<int>& stream, int batch_size, int seq_len) {
  // stream holds batch_size rows of (seq_len + 1) tokens.
  Batch b;
  b.batch = batch_size;
  b.seq = seq_len;
  b.tokens.resize(static_cast<std::size_t>(batch_size) * seq_len);
  b.targets.resize(b.tokens.size());
  for (int r = 0; r < batch_size; ++r) {
    const int* row = stream.data() + static_cast<std::size_t>(r) * (seq_len + 1);
    for (int t = 0; t < seq_len; ++t) {
      b.tokens[static_cast<std::size_t>(r) * seq_len + t] = row[t];
      b.targets[static_cast<std::size_t>(r) * seq_len + t] = row[t + 1];
    }
  }
  return b;
}

class CopyTask final : public Task {
 public:
  CopyTask(int vocab, int prefix_len, Rng rng) : vocab_(vocab), prefix_(prefix_len), rng_(rng) {
    if (vocab_ < 2) throw std::invalid_argument("copy task: vocab_size must be >= 2");
    if (prefix_ < 1) throw std::invalid_argument("copy task: prefix_len must be >= 1");
  }

  Batch next_batch(int batch_size, int seq_len) override {
    std::vector<int> stream(static_cast<std::size_t>(batch_size) * (seq_len + 1));
    for (int r = 0; r < batch_size; ++r) {
      int* row = stream.data() + static_cast<std::size_t>(r) * (seq_len + 1);
      for (int t = 0; t < seq_len + 1; ++t) {
        row[t] = (t < prefix_) ? static_cast<int>(rng_.next_below(vocab_)) : row[t - prefix_];
      }
    }
    return shift_into_batch(stream, batch_size, seq_len);
  }

  std::string describe() const override {
    return "copy(prefix=" + std::to_string(prefix_) + ")";
  }

 private:
  int vocab_;
  int prefix_;
  Rng rng_;
};

class ModAddTask final : public Task {
 public:
  ModAddTask(int vocab, Rng rng) : vocab_(vocab), rng_(rng) {
    if (vocab_ < 2) throw std::invalid_argument("modadd task: vocab_size must be >= 2");
  }

  Batch next_batch(int batch_size, int seq_len) override {
    std::vector<int> stream(static_cast<std::size_t>(batch_size) * (seq_len + 1));
    for (int r = 0; r < batch_size; ++r) {
      int* row = stream.data() + static_cast<std::size_t>(r) * (seq_len + 1);
      for (int t = 0; t < seq_len + 1; ++t) {
        row[t] = (t < 2) ? static_cast<int>(rng_.next_below(vocab_))
                         : (row[t - 1] + row[t - 2]) % vocab_;
      }
    }
    return shift_into_batch(stream, batch_size, seq_len);
  }

  std::string describe() const override { return "modadd"; }

 private:
  int vocab_;
  Rng rng_;
};

class CharLmTask final : public Task {
 public:
  CharLmTask(int vocab, const std::string& text, Rng rng) : rng_(rng) {
    if (text.empty()) throw std::invalid_argument("charlm task: empty corpus");
    std::map<char, int> ids;
    for (char ch : text) {
      ids.emplace(ch, 0);
    }
    int next = 0;
    for (auto& [ch, id] : ids) {
      id = next++;
    }
    if (next > vocab) {
      throw std::invalid_argument("charlm task: corpus has " + std::to_string(next) +
                                  " distinct characters but vocab_size is " +
                                  std::to_string(vocab));
    }
    data_.reserve(text.size());
    for (char ch : text) {
      data_.push_back(ids[ch]);
    }
  }

  Batch next_batch(int batch_size, int seq_len) override {
    if (data_.size() < static_cast<std::size_t>(seq_len) + 2) {
      throw std::invalid_argument("charlm task: corpus shorter than one window");
    }
    std::vector<int> stream(static_cast<std::size_t>(batch_size) * (seq_len + 1));
    const std::uint64_t max_start = data_.size() - (static_cast<std::size_t>(seq_len) + 1);
    for (int r = 0; r < batch_size; ++r) {
      const std::size_t start = rng_.next_below(max_start + 1);
      int* row = stream.data() + static_cast<std::size_t>(r) * (seq_len + 1);
      for (int t = 0; t < seq_len + 1; ++t) {
        row[t] = data_[start + t];
      }
    }
    return shift_into_batch(stream, batch_size, seq_len);
  }

  std::string describe() const override { return "charlm"; }

 private:
  std::vector<int> data_;
  Rng rng_;
};

}  // namespace

std::unique_ptr<Task> make_copy_task(int vocab_size, int prefix_len, Rng rng) {
  return std::make_unique<CopyTask>(vocab_size, prefix_len, rng);
}

std::unique_ptr<Task> make_mod_add_task(int vocab_size, Rng rng) {
  return std::make_unique<ModAddTask>(vocab_size, rng);
}

std::unique_ptr<Task> make_char_lm_task(int vocab_size, const std::string& text, Rng rng) {
  return std::make_unique<CharLmTask>(vocab_size, text.empty() ? kBuiltinCorpus : text, rng);
}

std::unique_ptr<Task> make_char_lm_task_from_file(int vocab_size, const std::string& path,
                                                  Rng rng) {
  if (path.empty()) {
    return make_char_lm_task(vocab_size, "", rng);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("charlm task: cannot open corpus file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return make_char_lm_task(vocab_size, buf.str(), rng);
}

}  // namespace blocksel
