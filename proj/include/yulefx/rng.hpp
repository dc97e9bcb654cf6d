#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace yulefx {

/// Named substreams derived from a single base seed.
///
/// Every consumer of randomness draws from its own stream so that changing,
/// say, the noise level never perturbs the Yule-Simon draws of the same seed.
enum class Stream : std::uint64_t {
  draws = 0x6472617773ULL,
  covariate = 0x636f766172ULL,
  noise = 0x6e6f697365ULL,
  folds = 0x666f6c6473ULL,
  restarts = 0x7265737461ULL,
  cell = 0x63656c6cULL,
};

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent seed from a base seed and a path of tags.
///
/// derive_seed(b, {t1, t2}) = mix(mix(mix(b) ^ t1) ^ t2). The derivation is a
/// pure function of its inputs, so a replication's stream is the same no
/// matter which worker thread runs it or in which order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

inline std::uint64_t derive_seed(std::uint64_t base, Stream stream) noexcept {
  return derive_seed(base, {static_cast<std::uint64_t>(stream)});
}

/// xoshiro256** generator with explicit, portable distribution routines.
///
/// Distributions are implemented here rather than through <random> because the
/// standard distributions are implementation-defined, and datasets must be
/// bit-identical across toolchains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via the Marsaglia polar method.
  double normal() noexcept;

  /// True with probability p; values outside [0, 1] saturate.
  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace yulefx
