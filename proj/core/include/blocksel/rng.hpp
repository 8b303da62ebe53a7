#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace blocksel {

/// Deterministic seedable generator (xoshiro256++ seeded through splitmix64).
///
/// Integer output is bit-reproducible everywhere; the floating-point
/// samplers below only go through documented libm calls (sqrt/log/pow), so
/// streams agree across platforms up to libm rounding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent substream: same seed + different tag never collide with
  /// each other or with the root stream.
  static Rng derive(std::uint64_t seed, std::uint64_t stream_tag);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double next_double();

  /// Uniform integer in [0, n), unbiased (rejection).
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal via the Marsaglia polar method (one spare cached).
  double normal();

  std::array<std::uint64_t, 4> state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Sub-seed for an independent stream (what Rng::derive seeds itself with).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_tag);

/// One draw from Gamma(shape, 1) via Marsaglia-Tsang, with the
/// Gamma(shape+1) * U^(1/shape) boost for shape < 1.
/// Throws std::invalid_argument for shape <= 0. Result is finite and > 0.
double sample_gamma(double shape, Rng& rng);

/// p_i = g_i / sum(g), g_i ~ Gamma(alpha_i, 1). The result sums to 1 within
/// 1e-12 and every entry is strictly positive; a degenerate all-zero draw is
/// resampled internally and never returned.
std::vector<double> sample_dirichlet(const std::vector<double>& alpha, Rng& rng);

/// m distinct indices by successive categorical draws, renormalizing the
/// remaining mass after each draw. Throws std::invalid_argument if
/// m > p.size(). If the remaining mass underflows to zero the lowest
/// unselected index is taken, so m == p.size() always exhausts the range.
std::vector<std::size_t> weighted_sample_without_replacement(
    const std::vector<double>& p, std::size_t m, Rng& rng);

}  // namespace blocksel
