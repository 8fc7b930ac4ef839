#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace flowpath {

/// 64-bit SplitMix step, used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator with portable uniform/normal draws. The engine state can
/// be serialized so runs resume bit-exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Index drawn proportionally to `weights` (need not be normalized).
  int categorical(std::span<const double> weights);

  Rng split(std::uint64_t stream) { return Rng(derive_seed(next_u64(), stream)); }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowpath
