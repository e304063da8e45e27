#pragma once
// Portable seeded randomness.
//
// All randomness in the library flows through Rng, a thin wrapper over
// std::mt19937_64 (whose output sequence is fixed by the C++ standard) with
// hand-written distributions, because the std:: distribution adaptors are
// implementation-defined and would break cross-platform reproducibility.
// Independent streams are derived with the SplitMix64 finalizer:
//   stream(seed, index) = mt19937_64(splitmix64(seed ^ splitmix64(index + golden)))

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace modfuse {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Stream `index` derived from `seed`; distinct indices give unrelated streams.
    static Rng stream(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller (the second variate is cached).
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace modfuse
