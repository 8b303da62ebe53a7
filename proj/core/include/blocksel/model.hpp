#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blocksel/tensor.hpp"

namespace blocksel {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 0;
  int n_heads = 0;
  int n_blocks = 0;
  int mlp_ratio = 4;
  int max_seq_len = 0;
  /// Accounting only (optimizer-state byte costs); numerics run in double.
  int param_dtype_bytes = 4;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Minimal pre-LN decoder-only transformer with hand-written backprop.
///
/// Layout: token embedding (+ fixed sinusoidal position encoding), n_blocks x
/// {LN, causal multi-head attention, LN, GELU MLP}, final LN, untied linear
/// head. No biases in the attention/MLP projections, no dropout.
///
/// forward_loss and backward are pure functions of (params, batch): repeated
/// calls produce bit-identical results.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  /// Mean cross-entropy over all target positions (causal masking enforced).
  double forward_loss(const Batch& batch) const;

  /// Populates every ParamTensor::grad with dloss/dvalues and returns the
  /// loss. Gradients are computed for the full model every call; which
  /// parameters get *updated* is the optimizer's concern.
  double backward(const Batch& batch);

  const ModelConfig& config() const { return config_; }
  std::vector<ParamTensor>& params() { return params_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  std::size_t param_count() const;

  /// Indices into params() for the named pieces, used by the partition.
  struct BlockParams {
    int ln1_gain, ln1_bias;
    int wq, wk, wv, wo;
    int ln2_gain, ln2_bias;
    int mlp_w1, mlp_w2;
  };
  int embedding_index() const { return embed_; }
  const std::vector<BlockParams>& block_indices() const { return blocks_; }
  int final_norm_gain_index() const { return final_gain_; }
  int final_norm_bias_index() const { return final_bias_; }
  int head_index() const { return head_; }

 private:
  ModelConfig config_;
  std::vector<ParamTensor> params_;
  int embed_ = -1;
  std::vector<BlockParams> blocks_;
  int final_gain_ = -1;
  int final_bias_ = -1;
  int head_ = -1;
};

}  // namespace blocksel
