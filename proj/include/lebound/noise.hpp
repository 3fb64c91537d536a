#pragma once

// Named random streams. Every estimate is keyed by (seed, purpose, counter);
// each consumer then draws from its own stream, so per-group noise does not
// depend on which other groups are evaluated, and bound variants that share a
// key see common random numbers.

#include <cstdint>
#include <random>
#include <vector>

namespace lebound {

enum class Stream : std::uint32_t {
  theta = 1,
  local = 2,
  momentum = 3,
  minibatch = 4,
};

enum class Purpose : std::uint32_t {
  pretrain = 1,
  train = 2,
  evaluate = 3,
  test = 4,
  data = 5,
};

using Rng = std::mt19937_64;

class NoiseStreams {
 public:
  NoiseStreams(std::uint64_t seed, Purpose purpose, std::uint64_t counter)
      : seed_(seed), purpose_(purpose), counter_(counter) {}

  /// Fresh generator for `stream`, sub-indexed (e.g. by group).
  Rng rng(Stream stream, std::uint64_t index = 0) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(purpose_),
                      static_cast<std::uint32_t>(counter_),
                      static_cast<std::uint32_t>(counter_ >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  Purpose purpose_;
  std::uint64_t counter_;
};

/// Sequential standard-normal draws from one generator.
class NormalSource {
 public:
  explicit NormalSource(Rng rng) : rng_(std::move(rng)) {}

  std::vector<double> draw(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = normal_(rng_);
    return out;
  }
  double draw_one() { return normal_(rng_); }
  Rng& engine() { return rng_; }

 private:
  Rng rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace lebound
