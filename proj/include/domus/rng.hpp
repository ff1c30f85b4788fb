#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace domus {

/// Seeded 64-bit Mersenne Twister with portable derived draws. The standard
/// distributions are implementation-defined, so draws are built directly
/// from the engine output to keep seeded results identical across
/// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : Rng({seed}) {}

    /// Independent stream keyed by several integers, e.g. (seed, member).
    Rng(std::initializer_list<std::uint64_t> key) {
        std::vector<std::uint32_t> words;
        for (auto k : key) {
            words.push_back(static_cast<std::uint32_t>(k));
            words.push_back(static_cast<std::uint32_t>(k >> 32));
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do v = engine_();
        while (v >= limit);
        return v % n;
    }

    /// Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool chance(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace domus
