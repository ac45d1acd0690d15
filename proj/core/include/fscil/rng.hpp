#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace fscil {

/// SplitMix64 generator. Every random draw in the project goes through this
/// type so runs are reproducible bit-for-bit on any platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() noexcept;

  /// Uniform double in [lo, hi). Returns lo when the range has zero width.
  double uniform(double lo, double hi) noexcept;

  /// Standard normal via Box-Muller. Each call consumes two uniforms and
  /// returns the cosine branch; no value is cached between calls.
  double gaussian() noexcept;

  /// Uniform integer in [0, n) by rejection (n > 0).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// The SplitMix64 output finalizer on its own.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a 64-bit hash of a byte string.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Seed for a named substream, e.g. derive_seed(master, "aug", {session, epoch}).
/// Distinct names or indices give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                          std::initializer_list<std::uint64_t> indices = {}) noexcept;

}  // namespace fscil
