#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace nsdx {

// Seeded PRNG with platform-independent derived draws. std::mt19937_64 is
// fully specified by the standard; the standard distributions are not, so
// uniform draws and shuffles are derived from the raw engine output here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, index), e.g. one per grid setting.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  double uniform();                          // [0,1)
  double uniform(double lo, double hi);      // [lo,hi)
  std::size_t below(std::size_t n);          // [0,n), n > 0

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nsdx
