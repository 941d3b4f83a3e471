#pragma once

#include <cmath>
#include <cstdint>

namespace committee_audit {

/// SplitMix64 (Steele, Lea, Flood 2014). Used instead of <random> engines and distributions so
/// that seeded streams are identical on every platform and standard library.
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kMix1 = 0xBF58476D1CE4E5B9ull;
    static constexpr std::uint64_t kMix2 = 0x94D049BB133111EBull;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += kGamma);
        z = (z ^ (z >> 30)) * kMix1;
        z = (z ^ (z >> 27)) * kMix2;
        return z ^ (z >> 31);
    }

    /// Uniform in the open interval (0, 1): the top 53 bits, offset by half an ulp.
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

} // namespace committee_audit
