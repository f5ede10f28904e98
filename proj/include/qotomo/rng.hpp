#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace qotomo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Random stream owned by one block. The engine state depends only on
/// (master seed, block index), never on which worker runs the block.
class RngStream {
public:
  RngStream(std::uint64_t master_seed, std::uint64_t block_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(master_seed)),
                      static_cast<std::uint32_t>(splitmix64(master_seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(block_index ^ 0x5bd1e995ULL)),
                      static_cast<std::uint32_t>(splitmix64(block_index ^ 0x5bd1e995ULL) >> 32)};
    engine_.seed(seq);
  }

  double uniform() { return unit_(engine_); }

  /// Uniform phase in [0, 2 pi).
  double phase() {
    const double p = 2.0 * std::numbers::pi * unit_(engine_);
    return p < 2.0 * std::numbers::pi ? p : 0.0;
  }

  double normal() { return normal_(engine_); }

  bool bernoulli(double p) { return unit_(engine_) < p; }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace qotomo
