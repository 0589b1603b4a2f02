#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace glassbox {

// xoshiro256** seeded through splitmix64. The stream for a given seed is
// identical on every platform; all distributions below are implemented here
// rather than through <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in the open interval (0, 1); never returns 0.
  double uniform_open();
  double uniform(double lo, double hi);
  // Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double stddev);
  // Standard logistic variate log(u) - log(1 - u).
  double logistic();
  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  std::vector<std::size_t> permutation(std::size_t n);

  // Independent child generator; advances this generator by one draw.
  Rng split();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace glassbox
