#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace bps::rng {

/// SplitMix64 finalizer; the mixing primitive behind all stream derivation.
constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** engine. Substream engines are constructed per
/// (time, particle) and per (sweep, time), so construction must be cheap.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(std::uint64_t seed) {
    // SplitMix64 stream seeds the full state.
    std::uint64_t z = seed;
    for (auto& word : state_) {
      word = mix(z);
      z = word;
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t out = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return out;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

/// Deterministic stream key. Child keys are derived by hashing integer tags,
/// so substreams depend only on logical indices (pipeline, time, particle),
/// never on thread placement or evaluation order. Runs are bit-reproducible
/// at any parallelism level.
struct Key {
  std::uint64_t state = 0;

  [[nodiscard]] constexpr Key child(std::uint64_t tag) const noexcept {
    return Key{mix(state ^ mix(tag))};
  }
  template <typename... Tags>
  [[nodiscard]] constexpr Key child(std::uint64_t tag, Tags... rest) const noexcept {
    return child(tag).child(static_cast<std::uint64_t>(rest)...);
  }
  [[nodiscard]] Engine engine() const { return Engine(mix(state)); }
};

/// Stream tags; one per logical consumer of randomness.
enum Stream : std::uint64_t {
  kPipeline = 0x101,
  kProposal,
  kResample,
  kIntervention,
  kFfbs,
  kXSweep,
  kSigmaSweep,
  kPredictive,
  kCombine,
  kSimulate,
  kBaseline,
};

inline double draw_uniform(Engine& eng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

inline double draw_normal(Engine& eng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(eng);
}

/// Gamma(shape, rate). Shape zero is the degenerate point mass at zero,
/// which the beta-gamma recursions hit exactly at beta = 1.
inline double draw_gamma_rate(Engine& eng, double shape, double rate) {
  if (shape == 0.0) return 0.0;
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("gamma: shape/rate must be positive");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(eng);
}

/// InverseGamma(shape, scale): 1/x ~ Gamma(shape, rate = scale).
inline double draw_inverse_gamma(Engine& eng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("inverse gamma: parameters must be positive");
  double g = 0.0;
  do {
    g = draw_gamma_rate(eng, shape, scale);
  } while (g == 0.0);
  return 1.0 / g;
}

/// Beta(a, b) via two gammas. Zero shapes are the degenerate endpoints:
/// Beta(a, 0) = 1 and Beta(0, b) = 0 (the unit-discount limits).
inline double draw_beta(Engine& eng, double a, double b) {
  if (a < 0.0 || b < 0.0) throw std::invalid_argument("beta: negative shape");
  if (b == 0.0) return 1.0;
  if (a == 0.0) return 0.0;
  const double ga = draw_gamma_rate(eng, a, 1.0);
  const double gb = draw_gamma_rate(eng, b, 1.0);
  if (ga + gb == 0.0) return 0.5;
  return ga / (ga + gb);
}

}  // namespace bps::rng
