#pragma once

#include <cstdint>
#include <initializer_list>

namespace otsm {

// Counter-based 64-bit generator (SplitMix64). Each output is a hash of an
// advancing counter, so a stream is fully determined by its seed and the
// number of draws; no hidden state survives across streams. Substreams are
// derived with stream_seed(seed, {tags...}), which lets every noise block or
// trial be sampled independently of the order in which it is visited.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform draw in the open interval (0, 1) with 53-bit resolution.
  double next_uniform();

  // Standard normal draw: inverse-CDF applied to next_uniform(). The
  // approximation is a rational minimax fit refined with one Halley step,
  // accurate to full double precision and identical on every platform.
  double next_gaussian();

 private:
  std::uint64_t state_;
};

// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// Derives a substream seed from a base seed and a list of integer tags.
std::uint64_t stream_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> tags);

// Inverse of the standard normal CDF on (0, 1).
double inverse_normal_cdf(double p);

}  // namespace otsm
