#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ggsd {

/// xoshiro256** seeded through splitmix64. The stream depends only on the seed,
/// so shuffles and samples reproduce on every platform.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256starstar-splitmix64";

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

  /// Independent child generator for a named stream (e.g. a pipeline stage).
  Rng derive(std::string_view stream) const;
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
/// FNV-1a, used to turn stream names into sub-seeds.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace ggsd
