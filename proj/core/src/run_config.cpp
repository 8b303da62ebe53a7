#include "blocksel/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace blocksel {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Full:
      return "full";
    case Strategy::FixedTopK:
      return "fixed_topk";
    case Strategy::AdaGradSelect:
      return "ada_grad_select";
    case Strategy::UniformRandom:
      return "uniform_random";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "full") return Strategy::Full;
  if (name == "fixed_topk" || name == "topk") return Strategy::FixedTopK;
  if (name == "ada_grad_select" || name == "ada") return Strategy::AdaGradSelect;
  if (name == "uniform_random" || name == "random") return Strategy::UniformRandom;
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (full | fixed_topk | ada_grad_select | uniform_random)");
}

std::string task_name(TaskKind t) {
  switch (t) {
    case TaskKind::SyntheticCopy:
      return "copy";
    case TaskKind::SyntheticModAdd:
      return "modadd";
    case TaskKind::CharLM:
      return "charlm";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "copy") return TaskKind::SyntheticCopy;
  if (name == "modadd") return TaskKind::SyntheticModAdd;
  if (name == "charlm") return TaskKind::CharLM;
  throw std::invalid_argument("unknown task '" + name + "' (copy | modadd | charlm)");
}

AdaConfig RunConfig::ada() const {
  AdaConfig a;
  a.k_percent = k_percent;
  a.delta = delta;
  a.epsilon0 = epsilon0;
  a.lambda = lambda >= 0.0 ? lambda : default_lambda(epsilon0, epsilon_end, steps_per_epoch);
  a.steps_per_epoch = steps_per_epoch;
  a.force_first_explore = force_first_explore;
  return a;
}

void RunConfig::validate() const {
  model.validate();
  adamw.validate();
  if (epochs < 1) throw std::invalid_argument("RunConfig: epochs must be >= 1");
  if (steps_per_epoch < 1) throw std::invalid_argument("RunConfig: steps_per_epoch must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("RunConfig: batch_size must be >= 1");
  if (seq_len < 1 || seq_len > model.max_seq_len) {
    throw std::invalid_argument("RunConfig: seq_len must be in [1, max_seq_len]");
  }
  if (copy_prefix < 1) throw std::invalid_argument("RunConfig: copy_prefix must be >= 1");
  if (strategy != Strategy::Full) {
    ada().validate();  // also covers k_percent
  }
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value +
                              "'");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + value +
                                "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value +
                                "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "': expected a non-negative integer, got '" + value + "'");
  }
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "vocab_size") cfg.model.vocab_size = parse_int(key, value);
  else if (key == "d_model") cfg.model.d_model = parse_int(key, value);
  else if (key == "n_heads") cfg.model.n_heads = parse_int(key, value);
  else if (key == "n_blocks") cfg.model.n_blocks = parse_int(key, value);
  else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_int(key, value);
  else if (key == "max_seq_len") cfg.model.max_seq_len = parse_int(key, value);
  else if (key == "param_dtype_bytes") cfg.model.param_dtype_bytes = parse_int(key, value);
  else if (key == "strategy") cfg.strategy = parse_strategy(value);
  else if (key == "k_percent") cfg.k_percent = parse_real(key, value);
  else if (key == "include_auxiliary") cfg.include_auxiliary = parse_bool(key, value);
  else if (key == "cumulative_norms") cfg.cumulative_norms = parse_bool(key, value);
  else if (key == "delta") cfg.delta = parse_real(key, value);
  else if (key == "epsilon0") cfg.epsilon0 = parse_real(key, value);
  else if (key == "epsilon_end") cfg.epsilon_end = parse_real(key, value);
  else if (key == "lambda") cfg.lambda = (value == "auto") ? -1.0 : parse_real(key, value);
  else if (key == "force_first_explore") cfg.force_first_explore = parse_bool(key, value);
  else if (key == "lr") cfg.adamw.lr = parse_real(key, value);
  else if (key == "beta1") cfg.adamw.beta1 = parse_real(key, value);
  else if (key == "beta2") cfg.adamw.beta2 = parse_real(key, value);
  else if (key == "eps") cfg.adamw.eps = parse_real(key, value);
  else if (key == "weight_decay") cfg.adamw.weight_decay = parse_real(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "steps_per_epoch") cfg.steps_per_epoch = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "seq_len") cfg.seq_len = parse_int(key, value);
  else if (key == "task") cfg.task = parse_task(value);
  else if (key == "copy_prefix") cfg.copy_prefix = parse_int(key, value);
  else if (key == "charlm_path") cfg.charlm_path = value;
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "out_dir") cfg.out_dir = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace blocksel
