#pragma once

#include <cstdint>

namespace qkdsim {

/// Counter-based deterministic random stream (splitmix64).
///
/// Every protocol round owns an independent stream derived from
/// (master_seed, round_index) alone, so results do not depend on worker
/// count or scheduling. The derivation is fixed: the round counter is
/// folded into the seed with the 64-bit golden-ratio constant and passed
/// through the splitmix64 finalizer twice.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng for_round(std::uint64_t master_seed, std::uint64_t round_index) {
        std::uint64_t k = master_seed + kGolden * (round_index + 1);
        return Rng(mix64(mix64(k)));
    }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Unbiased-enough index in [0, n) for small n (Lemire multiply-shift).
    std::uint32_t index(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bit() { return (next_u64() >> 63) != 0; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace qkdsim
