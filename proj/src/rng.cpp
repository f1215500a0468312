#include "rrt/rng.hpp"

#include <cmath>

namespace rrt {

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) noexcept
{
    std::uint64_t st = seed;
    for (auto& w : s_) w = splitmix64(st);
}

namespace {

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t experiment, std::uint64_t replica) noexcept
{
    std::uint64_t st = root;
    std::uint64_t h = splitmix64(st);
    st = h ^ experiment;
    h = splitmix64(st);
    st = h ^ replica;
    return splitmix64(st);
}

} // namespace

RngStream::RngStream(std::uint64_t root, std::uint64_t experiment, std::uint64_t replica) noexcept
    : root_(root), experiment_(experiment), replica_(replica),
      engine_(derive_seed(root, experiment, replica))
{
}

double RngStream::normal_tail(double level) noexcept
{
    if (level < 0.5) {
        for (;;) {
            const double z = normal();
            if (z > level) return z;
        }
    }
    // Marsaglia's tail method
    for (;;) {
        const double x = std::sqrt(level * level - 2.0 * std::log(uniform()));
        if (uniform() * x <= level) return x;
    }
}

} // namespace rrt
