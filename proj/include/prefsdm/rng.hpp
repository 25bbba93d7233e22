#pragma once

#include <cstdint>

namespace prefsdm {

// Counter-based generator: draw i is a pure function of (key, i), so any
// element of a stream can be regenerated without replaying the prefix.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key);

  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const;
  // Standard normal built from counters 2i and 2i+1 (Box-Muller, cosine branch).
  double normal(std::uint64_t index) const;

 private:
  std::uint64_t key_;
};

// Sequential cursor over a CounterRng.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : rng_(key) {}

  std::uint64_t bits() { return rng_.bits(next_++); }
  double uniform() { return rng_.uniform(next_++); }
  double normal();

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace prefsdm
