#pragma once

#include <cstdint>
#include <string_view>

namespace condgpc {

/// Counter-based generator: every draw is a SplitMix64 hash of (key, counter),
/// so a stream is fully determined by its key and position and produces the
/// same numbers on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0) : key_(mix(key)) {}

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }
  /// Uniform in the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent sub-seed from a master seed and a stage label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace condgpc
