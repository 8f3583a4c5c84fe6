#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace featcomp {

// Counter-based generator: the n-th draw of a stream is a pure function of
// (key, n), so a stream's output depends only on its seed, its stream id and how
// many values it has produced. Modules take their own stream via split() so
// adding draws in one module never shifts the values another module sees.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal(double mean = 0.0, double stddev = 1.0);
  double exponential(double mean = 1.0);
  std::size_t uniform_index(std::size_t n);  // [0, n)
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// m distinct indices from [0, n), in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m, Rng& rng);

void shuffle(std::vector<std::size_t>& items, Rng& rng);

}  // namespace featcomp
