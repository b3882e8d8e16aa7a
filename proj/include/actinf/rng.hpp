#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace actinf {

/// Identifies one deterministic random stream. Identical (seed, stream)
/// pairs always produce identical draws.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Derive an independent sub-stream, e.g. one per trial.
  RngSpec child(std::uint64_t key) const {
    return RngSpec{seed, mix(stream ^ mix(key + 0x9e3779b97f4a7c15ULL))};
  }

  RngSpec child(std::initializer_list<std::uint64_t> keys) const {
    RngSpec out = *this;
    for (std::uint64_t k : keys) out = out.child(k);
    return out;
  }

  friend bool operator==(const RngSpec&, const RngSpec&) = default;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// Random source built on mt19937_64. All derived quantities (uniforms,
/// indices, normals) are computed here rather than via <random>
/// distributions so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(const RngSpec& spec) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                      static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(spec.stream),
                      static_cast<std::uint32_t>(spec.stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Bernoulli(p); p <= 0 never fires and p >= 1 always fires.
  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace actinf
