#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace laplab
{
    // SplitMix64 finaliser; used only to derive well-separated seeds.
    constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Seed of the stream for (base, a, b), e.g. (base_seed, r, replication).
    // Streams are independent of evaluation order, so parallel and serial runs
    // draw identical numbers.
    constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0) noexcept
    {
        return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1342543de82ef95ULL + 1));
    }

    // mt19937_64 with hand-rolled variate transforms so draws are identical
    // across standard library implementations.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : engine_(seed) {}

        // Uniform on the open interval (0, 1).
        double uniform() noexcept { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

        double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

        std::uint64_t next() noexcept { return engine_(); }

    private:
        std::mt19937_64 engine_;
    };
}
