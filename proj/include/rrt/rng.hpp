#pragma once
//
// Counter-derived random streams. Every replica draws from its own
// xoshiro256++ engine whose state is a SplitMix64 hash of
// (root seed, experiment id, replica index), so parallel runs reproduce
// serial ones without coordination.
//

#include <cstdint>
#include <string_view>

#include <boost/random/normal_distribution.hpp>

namespace rrt {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// FNV-1a; used to turn experiment labels into stream ids.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

class RngStream {
public:
    RngStream(std::uint64_t root, std::uint64_t experiment, std::uint64_t replica) noexcept;

    std::uint64_t bits() noexcept { return engine_(); }
    // uniform on the open interval (0, 1)
    double uniform() noexcept { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
    double normal() noexcept { return normal_(engine_); }
    // standard normal conditioned on exceeding `level`
    double normal_tail(double level) noexcept;

    Xoshiro256pp& engine() noexcept { return engine_; }

    std::uint64_t root() const noexcept { return root_; }
    std::uint64_t experiment() const noexcept { return experiment_; }
    std::uint64_t replica() const noexcept { return replica_; }

private:
    std::uint64_t root_, experiment_, replica_;
    Xoshiro256pp engine_;
    boost::random::normal_distribution<double> normal_;
};

} // namespace rrt
