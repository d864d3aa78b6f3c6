#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

// Self-contained deterministic RNG. The standard <random> distributions are
// implementation-defined, so every draw here is spelled out in plain IEEE
// arithmetic: identical seeds give identical streams on any conforming
// platform, which the reproducibility and checkpoint contracts depend on.

namespace asa {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive combination of seed material (fleet id, round, purpose tag).
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) {
    h = mix64(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

// Stream purposes, so independent uses of the same (seed, id, round) tuple
// never collide.
enum class StreamTag : std::uint64_t {
  FleetGen = 1,
  ParamInit = 2,
  Dropout = 3,
  LocalTrain = 4,
  Cluster = 5,
  Shuffle = 6,
  Usage = 7,
  Synthetic = 8,
  Partition = 9,
  Oracle = 10,
};

inline std::uint64_t derive_seed(std::uint64_t base, StreamTag tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  return mix_seed({base, static_cast<std::uint64_t>(tag), a, b});
}

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) {
      sm += 0x9e3779b97f4a7c15ULL;
      w = mix64(sm);
    }
  }

  explicit Rng(const std::array<std::uint64_t, 4>& state) : s_(state) {}

  std::uint64_t next() {
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

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection keeps the draw unbiased.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("bounded: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Box-Muller, cosine branch only: two uniforms per draw, no cached spare,
  // so the engine state alone captures the stream position.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Rejection-sampled truncated normal; bounds must bracket nonzero mass.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("truncated_normal: lo >= hi");
    for (int i = 0; i < 100000; ++i) {
      const double x = normal(mean, sd);
      if (x >= lo && x <= hi) return x;
    }
    throw std::runtime_error("truncated_normal: rejection did not terminate");
  }

  // Marsaglia-Tsang gamma(alpha, 1).
  double gamma(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("gamma: alpha must be > 0");
    if (alpha < 1.0) {
      const double g = gamma(alpha + 1.0);
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return g * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  std::vector<double> dirichlet(double alpha, std::size_t k) {
    std::vector<double> g(k);
    double sum = 0.0;
    for (auto& v : g) {
      v = gamma(alpha);
      sum += v;
    }
    if (sum <= 0.0) throw std::runtime_error("dirichlet: degenerate draw");
    for (auto& v : g) v /= sum;
    return g;
  }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::array<std::uint64_t, 4> state() const { return s_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace asa
