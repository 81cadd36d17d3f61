#include "sattn/rng.hpp"

namespace sattn {

std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 SeedSequence::stream(std::string_view name) const {
  return std::mt19937_64(splitmix64(seed_ ^ fnv1a64(name)));
}

std::mt19937_64 SeedSequence::stream(std::string_view name, std::uint64_t index) const {
  return std::mt19937_64(splitmix64(splitmix64(seed_ ^ fnv1a64(name)) + index));
}

}  // namespace sattn
