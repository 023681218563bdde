#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mtil {

/// Seeded RNG with named substreams. All distributions are implemented on
/// top of raw mt19937_64 draws with fixed algorithms, so streams are
/// identical across platforms and standard-library implementations.
///
/// Substreams are derived from the stream's key and a name (plus an optional
/// index), never from the engine state, so the draw order of a parent does
/// not affect its children.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed);

  SplitRng sub(std::string_view name) const;
  SplitRng sub(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of randomness.
  double next_unit();

  double uniform(double lo, double hi);

  /// Uniform integer on [lo, hi], bounds inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Index drawn proportionally to the given non-negative weights.
  int categorical(std::span<const double> weights);

  /// Fisher-Yates shuffle of the index vector.
  void shuffle(std::vector<int>& indices);

 private:
  SplitRng(std::uint64_t key, bool raw_key_tag);

  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Precomputed cumulative table for repeated categorical draws from one
/// distribution. One uniform variate per sample, O(log n) lookup.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> weights);
  int sample(SplitRng& rng) const;

 private:
  std::vector<double> cumulative_;
};

}  // namespace mtil
