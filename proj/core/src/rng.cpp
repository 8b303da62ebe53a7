#include "blocksel/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace blocksel {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) {
    word = splitmix64(sm);
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_tag) {
  std::uint64_t sm = seed;
  return splitmix64(sm) ^ (stream_tag * 0xd6e8feb86659fd93ULL);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream_tag) {
  return Rng(derive_seed(seed, stream_tag));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("Rng::next_below: n must be positive");
  }
  const std::uint64_t threshold = (0ULL - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) {
      return r % n;
    }
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("sample_gamma: shape must be > 0");
  }
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    double u;
    do {
      u = rng.next_double();
    } while (u == 0.0);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_double();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) {
      return d * v;
    }
    // log(0) is -inf and simply rejects.
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> sample_dirichlet(const std::vector<double>& alpha, Rng& rng) {
  if (alpha.empty()) {
    throw std::invalid_argument("sample_dirichlet: alpha must be non-empty");
  }
  for (double a : alpha) {
    if (!(a > 0.0)) {
      throw std::invalid_argument("sample_dirichlet: every alpha must be > 0");
    }
  }
  std::vector<double> p(alpha.size());
  for (;;) {
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      p[i] = sample_gamma(alpha[i], rng);
      total += p[i];
    }
    if (total > 0.0 && std::isfinite(total)) {
      bool positive = true;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] /= total;
        if (!(p[i] > 0.0)) {
          positive = false;
        }
      }
      if (positive) {
        return p;
      }
    }
    // Degenerate underflow: draw again.
  }
}

std::vector<std::size_t> weighted_sample_without_replacement(
    const std::vector<double>& p, std::size_t m, Rng& rng) {
  if (m > p.size()) {
    throw std::invalid_argument(
        "weighted_sample_without_replacement: m exceeds the number of categories");
  }
  std::vector<bool> taken(p.size(), false);
  std::vector<std::size_t> out;
  out.reserve(m);
  for (std::size_t draw = 0; draw < m; ++draw) {
    double mass = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!taken[i]) {
        mass += p[i];
      }
    }
    std::size_t pick = p.size();
    if (mass > 0.0) {
      const double u = rng.next_double() * mass;
      double cum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (taken[i]) {
          continue;
        }
        cum += p[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    }
    if (pick == p.size()) {
      // Rounding leftover or zero remaining mass: lowest unselected index.
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (!taken[i]) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = true;
    out.push_back(pick);
  }
  return out;
}

}  // namespace blocksel
