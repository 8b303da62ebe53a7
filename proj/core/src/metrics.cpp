#include "blocksel/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace blocksel {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string join(const std::vector<std::string>& names, char sep) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out.push_back(sep);
    out += names[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["vocab_size"] = c.model.vocab_size;
  j["d_model"] = c.model.d_model;
  j["n_heads"] = c.model.n_heads;
  j["n_blocks"] = c.model.n_blocks;
  j["mlp_ratio"] = c.model.mlp_ratio;
  j["max_seq_len"] = c.model.max_seq_len;
  j["param_dtype_bytes"] = c.model.param_dtype_bytes;
  j["strategy"] = strategy_name(c.strategy);
  j["k_percent"] = c.k_percent;
  j["include_auxiliary"] = c.include_auxiliary;
  j["cumulative_norms"] = c.cumulative_norms;
  j["delta"] = c.delta;
  j["epsilon0"] = c.epsilon0;
  j["epsilon_end"] = c.epsilon_end;
  j["lambda"] = c.strategy == Strategy::AdaGradSelect ? c.ada().lambda : c.lambda;
  j["force_first_explore"] = c.force_first_explore;
  j["lr"] = c.adamw.lr;
  j["beta1"] = c.adamw.beta1;
  j["beta2"] = c.adamw.beta2;
  j["eps"] = c.adamw.eps;
  j["weight_decay"] = c.adamw.weight_decay;
  j["epochs"] = c.epochs;
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["batch_size"] = c.batch_size;
  j["seq_len"] = c.seq_len;
  j["task"] = task_name(c.task);
  j["copy_prefix"] = c.copy_prefix;
  j["charlm_path"] = c.charlm_path;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string best = buf;
  // Shortest representation that still round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char cand[40];
    std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
    if (std::strtod(cand, nullptr) == v && std::string(cand).size() < best.size()) {
      best = cand;
    }
  }
  return best;
}

void write_metrics_csv(const std::string& path, const std::vector<StepRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("run error: cannot write metrics file '" + path + "'");
  }
  out << "step,epoch,loss,decision,epsilon,selected,device_opt_bytes,prefetch_bytes,"
         "evict_bytes,wall_ms\n";
  char wall[32];
  for (const auto& r : rows) {
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    out << r.step << ',' << r.epoch << ',' << format_double(r.loss) << ',' << r.decision << ','
        << format_double(r.epsilon) << ',' << join(r.selected, ';') << ',' << r.device_opt_bytes
        << ',' << r.prefetch_bytes << ',' << r.evict_bytes << ',' << wall << '\n';
  }
  if (!out) {
    throw std::runtime_error("run error: failed writing metrics file '" + path + "'");
  }
}

std::vector<StepRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open metrics file '" + path + "'");
  }
  std::vector<StepRow> rows;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("metrics file '" + path + "' is empty");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 10) {
      throw std::runtime_error("metrics file '" + path + "': malformed row '" + line + "'");
    }
    StepRow r;
    r.step = std::stoll(cells[0]);
    r.epoch = std::stoi(cells[1]);
    r.loss = std::strtod(cells[2].c_str(), nullptr);
    r.decision = cells[3];
    r.epsilon = std::strtod(cells[4].c_str(), nullptr);
    if (!cells[5].empty()) {
      r.selected = split(cells[5], ';');
    }
    r.device_opt_bytes = std::stoull(cells[6]);
    r.prefetch_bytes = std::stoull(cells[7]);
    r.evict_bytes = std::stoull(cells[8]);
    r.wall_ms = std::strtod(cells[9].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_json(const std::string& path, const RunMetrics& m) {
  ordered_json j;
  j["config"] = config_json(m.config);
  j["result"] = {
      {"steps", m.rows.size()},
      {"selection_m", m.selection_m},
      {"final_loss", m.final_loss},
      {"mean_loss_last_10pct", m.mean_loss_last_10pct},
      {"total_wall_ms", m.total_wall_ms},
  };
  j["memory"] = {
      {"p_total", m.final_memory.p_total},
      {"p_selected", m.final_memory.p_selected},
      {"bytes_per_param", m.final_memory.bytes_per_param},
      {"mem_full", m.final_memory.mem_full},
      {"mem_selective", m.final_memory.mem_selective},
      {"mem_saved", m.final_memory.mem_saved},
      {"percent_reduction", m.final_memory.percent_reduction},
      {"mean_device_opt_bytes", m.mean_device_opt_bytes},
  };
  ordered_json freq = ordered_json::array();
  for (const auto& e : m.frequency.entries) {
    freq.push_back({{"block", e.name}, {"count", e.count}, {"share", e.share}});
  }
  j["frequency"] = freq;
  j["frequency_total"] = m.frequency.total;

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("run error: cannot write summary file '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

void write_comparison_csv(const std::string& path, const Comparison& cmp) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("run error: cannot write comparison file '" + path + "'");
  }
  out << "strategy,k_percent,final_loss,mean_device_opt_bytes,total_transfer_bytes,"
         "percent_reduction,wall_ms\n";
  char wall[32];
  for (const auto& r : cmp.rows) {
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    out << r.strategy << ',' << format_double(r.k_percent) << ',' << format_double(r.final_loss)
        << ',' << format_double(r.mean_device_opt_bytes) << ',' << r.total_transfer_bytes << ','
        << format_double(r.percent_reduction) << ',' << wall << '\n';
  }
}

void write_comparison_json(const std::string& path, const Comparison& cmp) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : cmp.rows) {
    rows.push_back({{"strategy", r.strategy},
                    {"k_percent", r.k_percent},
                    {"final_loss", r.final_loss},
                    {"mean_device_opt_bytes", r.mean_device_opt_bytes},
                    {"total_transfer_bytes", r.total_transfer_bytes},
                    {"percent_reduction", r.percent_reduction},
                    {"wall_ms", r.wall_ms}});
  }
  ordered_json j;
  j["runs"] = rows;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("run error: cannot write comparison file '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

}  // namespace blocksel
