#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace blocksel {

/// A named parameter tensor with its gradient buffer. `grad` always has the
/// same element count as `values`; it is overwritten by Model::backward.
struct ParamTensor {
  std::string id;
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;

  std::size_t size() const { return values.size(); }
};

/// One training batch of token ids and aligned next-token labels,
/// both row-major [batch][seq].
struct Batch {
  int batch = 0;
  int seq = 0;
  std::vector<int> tokens;
  std::vector<int> targets;

  int token(int b, int t) const { return tokens[static_cast<std::size_t>(b) * seq + t]; }
  int target(int b, int t) const { return targets[static_cast<std::size_t>(b) * seq + t]; }
};

}  // namespace blocksel
