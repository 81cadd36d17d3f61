#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sattn {

/// 64-bit FNV-1a; stable across platforms, used for substream and config hashing.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Seeded generator family. Every consumer asks for a named substream so that
/// adding a parameter or a dropout site never perturbs the other streams.
class SeedSequence {
 public:
  explicit SeedSequence(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64 stream(std::string_view name) const;
  std::mt19937_64 stream(std::string_view name, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

}  // namespace sattn
