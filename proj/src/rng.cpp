#include "sbdrop/rng.hpp"

#include <cmath>
#include <numbers>

namespace sbdrop {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kRootDomain = 0x8F2C1B3A5D4E6F70ULL;
constexpr std::uint64_t kSplitDomain = 0xC3A5C85C97CB3127ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ kRootDomain)) {}

Rng::Rng(std::uint64_t key, raw_key_tag) : seed_(key), key_(key) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + kGamma * counter_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
  const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split() {
  ++counter_;
  const std::uint64_t child_key =
      mix64((key_ ^ kSplitDomain) + kGamma * counter_);
  return Rng(child_key, raw_key_tag{});
}

}  // namespace sbdrop
