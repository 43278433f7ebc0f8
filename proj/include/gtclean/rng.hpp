#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace gtclean {

/// xoshiro256** seeded through splitmix64. The standard library's
/// distributions are implementation-defined, so sampling helpers live here
/// to keep outputs identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Stable 64-bit FNV-1a hash.
std::uint64_t stable_hash(std::string_view text);

/// Per-stage seed derived from the master seed and a stage name.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

/// Per-item seed (tree index, restart index, ...).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace gtclean
