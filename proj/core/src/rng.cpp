#include "mtil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtil {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SplitRng::SplitRng(std::uint64_t seed) : SplitRng(splitmix64(seed), true) {}

SplitRng::SplitRng(std::uint64_t key, bool) : key_(key), engine_(key) {}

SplitRng SplitRng::sub(std::string_view name) const {
  return SplitRng(splitmix64(key_ ^ fnv1a64(name)), true);
}

SplitRng SplitRng::sub(std::string_view name, std::uint64_t index) const {
  return SplitRng(splitmix64(splitmix64(key_ ^ fnv1a64(name)) + index), true);
}

std::uint64_t SplitRng::next_u64() { return engine_(); }

double SplitRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

int SplitRng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  return lo + static_cast<int>(static_cast<std::uint64_t>(next_unit() * static_cast<double>(span)) % span);
}

double SplitRng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_unit() - 1.0;
    v = 2.0 * next_unit() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * m;
  has_spare_normal_ = true;
  return u * m;
}

int SplitRng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("categorical: negative weight");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("categorical: zero total weight");
  const double u = next_unit() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

void SplitRng::shuffle(std::vector<int>& indices) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
    std::swap(indices[i - 1], indices[j]);
  }
}

CategoricalSampler::CategoricalSampler(std::span<const double> weights) {
  cumulative_.reserve(weights.size());
  double acc = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("CategoricalSampler: negative weight");
    acc += w;
    cumulative_.push_back(acc);
  }
  if (cumulative_.empty() || acc <= 0.0)
    throw std::invalid_argument("CategoricalSampler: zero total weight");
}

int CategoricalSampler::sample(SplitRng& rng) const {
  const double u = rng.next_unit() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return static_cast<int>(std::min(idx, cumulative_.size() - 1));
}

}  // namespace mtil
