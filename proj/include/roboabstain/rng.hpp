#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "roboabstain/hash.hpp"

namespace roboabstain {

/// Deterministic generator. mt19937_64 output is fully specified by the
/// standard; bounded draws use rejection sampling instead of the
/// implementation-defined std distributions, so samples are identical
/// across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Seed derived from a stage tag plus every component of the key, so
  /// that e.g. adding an image never perturbs another image's draws.
  static SeededRng for_key(std::string_view stage, std::uint64_t seed, std::string_view image_hash,
                           std::string_view category) {
    std::string key;
    key.append(stage).append("|").append(std::to_string(seed)).append("|");
    key.append(image_hash).append("|").append(category);
    return SeededRng(sha256_u64(key));
  }

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % n + 1) % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x > limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// k distinct indices from [0, n), returned ascending.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SeededRng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace roboabstain
