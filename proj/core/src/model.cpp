#include "blocksel/model.hpp"

#include <cmath>
#include <stdexcept>

#include "blocksel/rng.hpp"

namespace blocksel {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

// out[t][c] = sum_r in[t][r] * w[r][c]; all matrices row-major.
void matmul(const double* in, const double* w, double* out, int t_dim, int r_dim, int c_dim) {
  for (int t = 0; t < t_dim; ++t) {
    double* out_row = out + static_cast<std::size_t>(t) * c_dim;
    for (int c = 0; c < c_dim; ++c) {
      out_row[c] = 0.0;
    }
    const double* in_row = in + static_cast<std::size_t>(t) * r_dim;
    for (int r = 0; r < r_dim; ++r) {
      const double x = in_row[r];
      const double* w_row = w + static_cast<std::size_t>(r) * c_dim;
      for (int c = 0; c < c_dim; ++c) {
        out_row[c] += x * w_row[c];
      }
    }
  }
}

// dw[r][c] += sum_t in[t][r] * dout[t][c]
void matmul_grad_w(const double* in, const double* dout, double* dw, int t_dim, int r_dim,
                   int c_dim) {
  for (int t = 0; t < t_dim; ++t) {
    const double* in_row = in + static_cast<std::size_t>(t) * r_dim;
    const double* dout_row = dout + static_cast<std::size_t>(t) * c_dim;
    for (int r = 0; r < r_dim; ++r) {
      const double x = in_row[r];
      double* dw_row = dw + static_cast<std::size_t>(r) * c_dim;
      for (int c = 0; c < c_dim; ++c) {
        dw_row[c] += x * dout_row[c];
      }
    }
  }
}

// din[t][r] += sum_c dout[t][c] * w[r][c]
void matmul_grad_in(const double* dout, const double* w, double* din, int t_dim, int r_dim,
                    int c_dim) {
  for (int t = 0; t < t_dim; ++t) {
    const double* dout_row = dout + static_cast<std::size_t>(t) * c_dim;
    double* din_row = din + static_cast<std::size_t>(t) * r_dim;
    for (int r = 0; r < r_dim; ++r) {
      const double* w_row = w + static_cast<std::size_t>(r) * c_dim;
      double acc = 0.0;
      for (int c = 0; c < c_dim; ++c) {
        acc += dout_row[c] * w_row[c];
      }
      din_row[r] += acc;
    }
  }
}

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * M_SQRT1_2)); }

double gelu_grad(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return cdf + z * pdf;
}

double position_encoding(int t, int j, int d_model) {
  const int pair = j / 2;
  const double angle = t * std::pow(10000.0, -2.0 * pair / d_model);
  return (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

// y = gain * (x - mean) / sqrt(var + eps) + bias, per row of length d.
void layer_norm_forward(const double* x, const double* gain, const double* bias, double* y,
                        double* mean_out, double* rstd_out, int t_dim, int d) {
  for (int t = 0; t < t_dim; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * d;
    double* yr = y + static_cast<std::size_t>(t) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) {
      mean += xr[j];
    }
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    mean_out[t] = mean;
    rstd_out[t] = rstd;
    for (int j = 0; j < d; ++j) {
      yr[j] = gain[j] * (xr[j] - mean) * rstd + bias[j];
    }
  }
}

void layer_norm_backward(const double* x, const double* gain, const double* mean,
                         const double* rstd, const double* dy, double* dx, double* dgain,
                         double* dbias, int t_dim, int d) {
  for (int t = 0; t < t_dim; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * d;
    const double* dyr = dy + static_cast<std::size_t>(t) * d;
    double* dxr = dx + static_cast<std::size_t>(t) * d;
    const double mu = mean[t];
    const double rs = rstd[t];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      const double xhat = (xr[j] - mu) * rs;
      const double dxhat = dyr[j] * gain[j];
      dgain[j] += dyr[j] * xhat;
      dbias[j] += dyr[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    const double inv_d = 1.0 / d;
    for (int j = 0; j < d; ++j) {
      const double xhat = (xr[j] - mu) * rs;
      const double dxhat = dyr[j] * gain[j];
      dxr[j] += rs * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
    }
  }
}

// Scratch for one sequence. Backward needs every intermediate, so the
// forward pass fills this and the reverse pass consumes it.
struct BlockCache {
  std::vector<double> x_in;          // T x d, block input
  std::vector<double> ln1_out;       // T x d
  std::vector<double> ln1_mean, ln1_rstd;
  std::vector<double> q, k, v;       // T x d (heads in column slices)
  std::vector<double> attn;          // heads x T x T softmax weights
  std::vector<double> ctx;           // T x d
  std::vector<double> x_mid;         // T x d, after attention residual
  std::vector<double> ln2_out;       // T x d
  std::vector<double> ln2_mean, ln2_rstd;
  std::vector<double> z1;            // T x hidden (pre-activation)
  std::vector<double> a1;            // T x hidden
};

struct SeqCache {
  std::vector<BlockCache> blocks;
  std::vector<double> x_final;       // T x d, input of the final norm
  std::vector<double> ln_f_out;      // T x d
  std::vector<double> ln_f_mean, ln_f_rstd;
  std::vector<double> logits;        // T x V
};

void validate_batch(const ModelConfig& cfg, const Batch& batch) {
  if (batch.batch <= 0 || batch.seq <= 0) {
    throw std::invalid_argument("batch: batch and seq must be positive");
  }
  if (batch.seq > cfg.max_seq_len) {
    throw std::invalid_argument("batch: seq exceeds max_seq_len");
  }
  const std::size_t need = static_cast<std::size_t>(batch.batch) * batch.seq;
  if (batch.tokens.size() != need || batch.targets.size() != need) {
    throw std::invalid_argument("batch: token/target buffers have the wrong size");
  }
  for (std::size_t i = 0; i < need; ++i) {
    if (batch.tokens[i] < 0 || batch.tokens[i] >= cfg.vocab_size) {
      throw std::invalid_argument("batch: token id out of vocabulary range");
    }
    if (batch.targets[i] < 0 || batch.targets[i] >= cfg.vocab_size) {
      throw std::invalid_argument("batch: target id out of vocabulary range");
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("ModelConfig: vocab_size must be positive");
  if (d_model <= 0) throw std::invalid_argument("ModelConfig: d_model must be positive");
  if (n_heads <= 0) throw std::invalid_argument("ModelConfig: n_heads must be positive");
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("ModelConfig: n_heads must divide d_model");
  }
  if (n_blocks < 1) throw std::invalid_argument("ModelConfig: n_blocks must be >= 1");
  if (mlp_ratio <= 0) throw std::invalid_argument("ModelConfig: mlp_ratio must be positive");
  if (max_seq_len <= 0) throw std::invalid_argument("ModelConfig: max_seq_len must be positive");
  if (param_dtype_bytes != 2 && param_dtype_bytes != 4 && param_dtype_bytes != 8) {
    throw std::invalid_argument("ModelConfig: param_dtype_bytes must be 2, 4 or 8");
  }
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);

  const int d = config_.d_model;
  const int v = config_.vocab_size;
  const int hidden = config_.mlp_ratio * d;

  auto add_gaussian = [&](const std::string& id, int rows, int cols) {
    ParamTensor p;
    p.id = id;
    p.shape = {rows, cols};
    p.values.resize(static_cast<std::size_t>(rows) * cols);
    for (double& w : p.values) {
      w = kInitStd * rng.normal();
    }
    p.grad.assign(p.values.size(), 0.0);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size() - 1);
  };
  auto add_constant = [&](const std::string& id, int n, double value) {
    ParamTensor p;
    p.id = id;
    p.shape = {n};
    p.values.assign(static_cast<std::size_t>(n), value);
    p.grad.assign(p.values.size(), 0.0);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size() - 1);
  };

  embed_ = add_gaussian("embed.tok", v, d);
  blocks_.reserve(config_.n_blocks);
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string base = "block." + std::to_string(i) + ".";
    BlockParams bp;
    bp.ln1_gain = add_constant(base + "ln1.gain", d, 1.0);
    bp.ln1_bias = add_constant(base + "ln1.bias", d, 0.0);
    bp.wq = add_gaussian(base + "attn.wq", d, d);
    bp.wk = add_gaussian(base + "attn.wk", d, d);
    bp.wv = add_gaussian(base + "attn.wv", d, d);
    bp.wo = add_gaussian(base + "attn.wo", d, d);
    bp.ln2_gain = add_constant(base + "ln2.gain", d, 1.0);
    bp.ln2_bias = add_constant(base + "ln2.bias", d, 0.0);
    bp.mlp_w1 = add_gaussian(base + "mlp.w1", d, hidden);
    bp.mlp_w2 = add_gaussian(base + "mlp.w2", hidden, d);
    blocks_.push_back(bp);
  }
  final_gain_ = add_constant("final_norm.gain", d, 1.0);
  final_bias_ = add_constant("final_norm.bias", d, 0.0);
  head_ = add_gaussian("head.w", d, v);
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p.size();
  }
  return n;
}

namespace {

// Runs the forward pass for one sequence, filling `cache`, and returns the
// summed (not averaged) cross-entropy over its positions.
double forward_one(const Model& model, const std::vector<ParamTensor>& params, const Batch& batch,
                   int b, SeqCache& cache) {
  const ModelConfig& cfg = model.config();
  const int t_dim = batch.seq;
  const int d = cfg.d_model;
  const int hidden = cfg.mlp_ratio * d;
  const int heads = cfg.n_heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t td = static_cast<std::size_t>(t_dim) * d;

  cache.blocks.resize(cfg.n_blocks);

  std::vector<double> x(td);
  const double* embed = params[model.embedding_index()].values.data();
  for (int t = 0; t < t_dim; ++t) {
    const double* row = embed + static_cast<std::size_t>(batch.token(b, t)) * d;
    for (int j = 0; j < d; ++j) {
      x[static_cast<std::size_t>(t) * d + j] = row[j] + position_encoding(t, j, d);
    }
  }

  for (int blk = 0; blk < cfg.n_blocks; ++blk) {
    const Model::BlockParams& bp = model.block_indices()[blk];
    BlockCache& c = cache.blocks[blk];
    c.x_in = x;
    c.ln1_out.resize(td);
    c.ln1_mean.resize(t_dim);
    c.ln1_rstd.resize(t_dim);
    layer_norm_forward(c.x_in.data(), params[bp.ln1_gain].values.data(),
                       params[bp.ln1_bias].values.data(), c.ln1_out.data(), c.ln1_mean.data(),
                       c.ln1_rstd.data(), t_dim, d);

    c.q.resize(td);
    c.k.resize(td);
    c.v.resize(td);
    matmul(c.ln1_out.data(), params[bp.wq].values.data(), c.q.data(), t_dim, d, d);
    matmul(c.ln1_out.data(), params[bp.wk].values.data(), c.k.data(), t_dim, d, d);
    matmul(c.ln1_out.data(), params[bp.wv].values.data(), c.v.data(), t_dim, d, d);

    c.attn.assign(static_cast<std::size_t>(heads) * t_dim * t_dim, 0.0);
    c.ctx.assign(td, 0.0);
    std::vector<double> scores(t_dim);
    for (int hh = 0; hh < heads; ++hh) {
      const int off = hh * dh;
      double* attn_h = c.attn.data() + static_cast<std::size_t>(hh) * t_dim * t_dim;
      for (int i = 0; i < t_dim; ++i) {
        const double* qi = c.q.data() + static_cast<std::size_t>(i) * d + off;
        double max_s = -HUGE_VAL;
        for (int j = 0; j <= i; ++j) {
          const double* kj = c.k.data() + static_cast<std::size_t>(j) * d + off;
          double s = 0.0;
          for (int u = 0; u < dh; ++u) {
            s += qi[u] * kj[u];
          }
          s *= scale;
          scores[j] = s;
          if (s > max_s) max_s = s;
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_s);
          denom += scores[j];
        }
        double* arow = attn_h + static_cast<std::size_t>(i) * t_dim;
        for (int j = 0; j <= i; ++j) {
          arow[j] = scores[j] / denom;
        }
        double* ctx_i = c.ctx.data() + static_cast<std::size_t>(i) * d + off;
        for (int j = 0; j <= i; ++j) {
          const double a = arow[j];
          const double* vj = c.v.data() + static_cast<std::size_t>(j) * d + off;
          for (int u = 0; u < dh; ++u) {
            ctx_i[u] += a * vj[u];
          }
        }
      }
    }

    std::vector<double> proj(td);
    matmul(c.ctx.data(), params[bp.wo].values.data(), proj.data(), t_dim, d, d);
    for (std::size_t idx = 0; idx < td; ++idx) {
      x[idx] = c.x_in[idx] + proj[idx];
    }
    c.x_mid = x;

    c.ln2_out.resize(td);
    c.ln2_mean.resize(t_dim);
    c.ln2_rstd.resize(t_dim);
    layer_norm_forward(c.x_mid.data(), params[bp.ln2_gain].values.data(),
                       params[bp.ln2_bias].values.data(), c.ln2_out.data(), c.ln2_mean.data(),
                       c.ln2_rstd.data(), t_dim, d);

    c.z1.resize(static_cast<std::size_t>(t_dim) * hidden);
    matmul(c.ln2_out.data(), params[bp.mlp_w1].values.data(), c.z1.data(), t_dim, d, hidden);
    c.a1.resize(c.z1.size());
    for (std::size_t idx = 0; idx < c.z1.size(); ++idx) {
      c.a1[idx] = gelu(c.z1[idx]);
    }
    std::vector<double> mlp_out(td);
    matmul(c.a1.data(), params[bp.mlp_w2].values.data(), mlp_out.data(), t_dim, hidden, d);
    for (std::size_t idx = 0; idx < td; ++idx) {
      x[idx] = c.x_mid[idx] + mlp_out[idx];
    }
  }

  cache.x_final = x;
  cache.ln_f_out.resize(td);
  cache.ln_f_mean.resize(t_dim);
  cache.ln_f_rstd.resize(t_dim);
  layer_norm_forward(cache.x_final.data(), params[model.final_norm_gain_index()].values.data(),
                     params[model.final_norm_bias_index()].values.data(), cache.ln_f_out.data(),
                     cache.ln_f_mean.data(), cache.ln_f_rstd.data(), t_dim, d);

  const int v_dim = cfg.vocab_size;
  cache.logits.resize(static_cast<std::size_t>(t_dim) * v_dim);
  matmul(cache.ln_f_out.data(), params[model.head_index()].values.data(), cache.logits.data(),
         t_dim, d, v_dim);

  double loss = 0.0;
  for (int t = 0; t < t_dim; ++t) {
    const double* lrow = cache.logits.data() + static_cast<std::size_t>(t) * v_dim;
    double max_l = lrow[0];
    for (int u = 1; u < v_dim; ++u) {
      if (lrow[u] > max_l) max_l = lrow[u];
    }
    double denom = 0.0;
    for (int u = 0; u < v_dim; ++u) {
      denom += std::exp(lrow[u] - max_l);
    }
    loss += max_l + std::log(denom) - lrow[batch.target(b, t)];
  }
  return loss;
}

}  // namespace

double Model::forward_loss(const Batch& batch) const {
  validate_batch(config_, batch);
  SeqCache cache;
  double total = 0.0;
  for (int b = 0; b < batch.batch; ++b) {
    total += forward_one(*this, params_, batch, b, cache);
  }
  const double loss = total / (static_cast<double>(batch.batch) * batch.seq);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("forward_loss: non-finite loss");
  }
  return loss;
}

double Model::backward(const Batch& batch) {
  validate_batch(config_, batch);
  for (auto& p : params_) {
    p.grad.assign(p.values.size(), 0.0);
  }

  const int t_dim = batch.seq;
  const int d = config_.d_model;
  const int hidden = config_.mlp_ratio * d;
  const int heads = config_.n_heads;
  const int dh = d / heads;
  const int v_dim = config_.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t td = static_cast<std::size_t>(t_dim) * d;
  const double inv_positions = 1.0 / (static_cast<double>(batch.batch) * batch.seq);

  double total = 0.0;
  SeqCache cache;
  for (int b = 0; b < batch.batch; ++b) {
    total += forward_one(*this, params_, batch, b, cache);

    // d(loss)/d(logits) = (softmax - onehot) / positions
    std::vector<double> dlogits(static_cast<std::size_t>(t_dim) * v_dim);
    for (int t = 0; t < t_dim; ++t) {
      const double* lrow = cache.logits.data() + static_cast<std::size_t>(t) * v_dim;
      double* drow = dlogits.data() + static_cast<std::size_t>(t) * v_dim;
      double max_l = lrow[0];
      for (int u = 1; u < v_dim; ++u) {
        if (lrow[u] > max_l) max_l = lrow[u];
      }
      double denom = 0.0;
      for (int u = 0; u < v_dim; ++u) {
        denom += std::exp(lrow[u] - max_l);
      }
      for (int u = 0; u < v_dim; ++u) {
        drow[u] = std::exp(lrow[u] - max_l) / denom * inv_positions;
      }
      drow[batch.target(b, t)] -= inv_positions;
    }

    std::vector<double> dln_f(td, 0.0);
    matmul_grad_w(cache.ln_f_out.data(), dlogits.data(), params_[head_].grad.data(), t_dim, d,
                  v_dim);
    matmul_grad_in(dlogits.data(), params_[head_].values.data(), dln_f.data(), t_dim, d, v_dim);

    std::vector<double> dx(td, 0.0);
    layer_norm_backward(cache.x_final.data(), params_[final_gain_].values.data(),
                        cache.ln_f_mean.data(), cache.ln_f_rstd.data(), dln_f.data(), dx.data(),
                        params_[final_gain_].grad.data(), params_[final_bias_].grad.data(), t_dim,
                        d);

    for (int blk = config_.n_blocks - 1; blk >= 0; --blk) {
      const BlockParams& bp = blocks_[blk];
      const BlockCache& c = cache.blocks[blk];

      // MLP branch: x_out = x_mid + gelu(ln2(x_mid) W1) W2
      std::vector<double> da1(static_cast<std::size_t>(t_dim) * hidden, 0.0);
      matmul_grad_w(c.a1.data(), dx.data(), params_[bp.mlp_w2].grad.data(), t_dim, hidden, d);
      matmul_grad_in(dx.data(), params_[bp.mlp_w2].values.data(), da1.data(), t_dim, hidden, d);
      std::vector<double> dz1(da1.size());
      for (std::size_t idx = 0; idx < dz1.size(); ++idx) {
        dz1[idx] = da1[idx] * gelu_grad(c.z1[idx]);
      }
      std::vector<double> dln2(td, 0.0);
      matmul_grad_w(c.ln2_out.data(), dz1.data(), params_[bp.mlp_w1].grad.data(), t_dim, d,
                    hidden);
      matmul_grad_in(dz1.data(), params_[bp.mlp_w1].values.data(), dln2.data(), t_dim, d, hidden);
      // dx currently holds d(x_out); the residual passes it through to x_mid.
      layer_norm_backward(c.x_mid.data(), params_[bp.ln2_gain].values.data(), c.ln2_mean.data(),
                          c.ln2_rstd.data(), dln2.data(), dx.data(),
                          params_[bp.ln2_gain].grad.data(), params_[bp.ln2_bias].grad.data(),
                          t_dim, d);

      // Attention branch: x_mid = x_in + attn(ln1(x_in)) Wo
      std::vector<double> dctx(td, 0.0);
      matmul_grad_w(c.ctx.data(), dx.data(), params_[bp.wo].grad.data(), t_dim, d, d);
      matmul_grad_in(dx.data(), params_[bp.wo].values.data(), dctx.data(), t_dim, d, d);

      std::vector<double> dq(td, 0.0), dk(td, 0.0), dv(td, 0.0);
      std::vector<double> da_row(t_dim), ds_row(t_dim);
      for (int hh = 0; hh < heads; ++hh) {
        const int off = hh * dh;
        const double* attn_h = c.attn.data() + static_cast<std::size_t>(hh) * t_dim * t_dim;
        for (int i = 0; i < t_dim; ++i) {
          const double* arow = attn_h + static_cast<std::size_t>(i) * t_dim;
          const double* dctx_i = dctx.data() + static_cast<std::size_t>(i) * d + off;
          // dv and dA from ctx_i = sum_j a_ij v_j
          double dot_a_da = 0.0;
          for (int j = 0; j <= i; ++j) {
            const double* vj = c.v.data() + static_cast<std::size_t>(j) * d + off;
            double da = 0.0;
            for (int u = 0; u < dh; ++u) {
              da += dctx_i[u] * vj[u];
            }
            da_row[j] = da;
            dot_a_da += arow[j] * da;
            double* dvj = dv.data() + static_cast<std::size_t>(j) * d + off;
            for (int u = 0; u < dh; ++u) {
              dvj[u] += arow[j] * dctx_i[u];
            }
          }
          // softmax backward, then scores -> q, k
          const double* qi = c.q.data() + static_cast<std::size_t>(i) * d + off;
          double* dqi = dq.data() + static_cast<std::size_t>(i) * d + off;
          for (int j = 0; j <= i; ++j) {
            ds_row[j] = arow[j] * (da_row[j] - dot_a_da) * scale;
          }
          for (int j = 0; j <= i; ++j) {
            const double ds = ds_row[j];
            const double* kj = c.k.data() + static_cast<std::size_t>(j) * d + off;
            double* dkj = dk.data() + static_cast<std::size_t>(j) * d + off;
            for (int u = 0; u < dh; ++u) {
              dqi[u] += ds * kj[u];
              dkj[u] += ds * qi[u];
            }
          }
        }
      }

      std::vector<double> dln1(td, 0.0);
      matmul_grad_w(c.ln1_out.data(), dq.data(), params_[bp.wq].grad.data(), t_dim, d, d);
      matmul_grad_in(dq.data(), params_[bp.wq].values.data(), dln1.data(), t_dim, d, d);
      matmul_grad_w(c.ln1_out.data(), dk.data(), params_[bp.wk].grad.data(), t_dim, d, d);
      matmul_grad_in(dk.data(), params_[bp.wk].values.data(), dln1.data(), t_dim, d, d);
      matmul_grad_w(c.ln1_out.data(), dv.data(), params_[bp.wv].grad.data(), t_dim, d, d);
      matmul_grad_in(dv.data(), params_[bp.wv].values.data(), dln1.data(), t_dim, d, d);

      layer_norm_backward(c.x_in.data(), params_[bp.ln1_gain].values.data(), c.ln1_mean.data(),
                          c.ln1_rstd.data(), dln1.data(), dx.data(),
                          params_[bp.ln1_gain].grad.data(), params_[bp.ln1_bias].grad.data(),
                          t_dim, d);
    }

    double* dembed = params_[embed_].grad.data();
    for (int t = 0; t < t_dim; ++t) {
      double* row = dembed + static_cast<std::size_t>(batch.token(b, t)) * d;
      const double* dxr = dx.data() + static_cast<std::size_t>(t) * d;
      for (int j = 0; j < d; ++j) {
        row[j] += dxr[j];
      }
    }
  }

  const double loss = total * inv_positions;
  if (!std::isfinite(loss)) {
    throw std::runtime_error("backward: non-finite loss");
  }
  for (const auto& p : params_) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("backward: non-finite gradient in tensor '" + p.id + "'");
      }
    }
  }
  return loss;
}

}  // namespace blocksel
