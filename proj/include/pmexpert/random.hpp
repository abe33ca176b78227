#ifndef PMEXPERT_RANDOM_HPP
#define PMEXPERT_RANDOM_HPP

#include <cstdint>
#include <random>

namespace pmexpert {

/// Seeded random stream. Uniform draws are built from raw 64-bit engine output
/// so that streams are reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint32_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Sub-stream identifiers derived from a single run seed.
inline constexpr std::uint32_t kLossStream = 1;
inline constexpr std::uint32_t kLearnerStream = 2;

}  // namespace pmexpert

#endif  // PMEXPERT_RANDOM_HPP
