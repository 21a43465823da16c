#pragma once

#include <cstdint>

namespace sbdrop {

// Counter-based splittable PRNG.
//
// A stream is identified by a 64-bit key; draw i of a stream is
// mix64(key + GAMMA * i), i.e. the SplitMix64 sequence entered at `key`.
// Identical seed + identical draw sequence gives bit-identical output.
//
// split() derives a child key by mixing (key, counter) under a separate
// domain constant. Two streams of n draws each can only overlap if their
// keys differ by a multiple of GAMMA smaller than n; with uniformly mixed
// keys that has probability (2n+1)/2^64 per pair, below 2^-20 for the
// stream and draw counts used in this project.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  // Standard normal via Box-Muller; always consumes exactly two draws.
  double next_normal();

  // Independent child stream. Advances this stream by one draw.
  Rng split();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  struct raw_key_tag {};
  Rng(std::uint64_t key, raw_key_tag);

  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace sbdrop
