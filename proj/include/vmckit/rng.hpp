#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace vmckit {

/// Independent random stream identified by (seed, stream id).
///
/// Streams with different ids are seeded through std::seed_seq from both
/// 64-bit words, so walker k of run s always sees the same numbers no matter
/// how many threads step the ensemble.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
    normal_.reset();
  }

  double uniform() { return unit_(engine_); }
  double normal() { return normal_(engine_); }
  std::uint64_t bits() { return engine_(); }

  /// Derive a child stream; used to hand each walker or experiment phase its own generator.
  Rng split(std::uint64_t stream) { return Rng(bits(), stream); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline std::vector<Rng> make_streams(std::uint64_t seed, std::size_t count) {
  std::vector<Rng> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.emplace_back(seed, k + 1);
  return out;
}

}  // namespace vmckit
