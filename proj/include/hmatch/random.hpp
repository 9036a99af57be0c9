#pragma once

// Reproducible random streams.
//
// Every random quantity comes from a std::mt19937_64 engine whose seed is
// derived from a user seed and a stream number with the SplitMix64 finaliser:
//
//   derive_seed(seed, stream) = splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15))
//
// Trial t of an experiment seeded with s uses derive_seed(s, t) as its own
// seed, so batches of trials can run in any order or on any number of
// threads and still see the same numbers. Normal and integer variates use
// Boost.Random's distributions, whose algorithms are fixed (unlike the
// implementation-defined ones in <random>).

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace hmatch {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15ULL));
}

class RandomStream {
 public:
  using Engine = std::mt19937_64;

  RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  double normal() { return normal_(engine_); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  Engine engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hmatch
