#pragma once
// Quadratic reference implementations used as oracles in tests.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

namespace rrt::oracle {

// max over t-index k in [0, N], s-index l in [k + lag, 2N] of min(f_k, f_l)
inline double gamma_brute(std::span<const double> f, std::size_t n_half, std::size_t lag)
{
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= n_half; ++k)
        for (std::size_t l = k + lag; l <= 2 * n_half; ++l) best = std::max(best, std::min(f[k], f[l]));
    return best;
}

// max over t-index k in [lag, N], s-index l in [0, k - lag] of min(f_k, f_l)
inline double gamma_prime_brute(std::span<const double> f, std::size_t lag)
{
    const std::size_t n = f.size() - 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lag; k <= n; ++k)
        for (std::size_t l = 0; l + lag <= k; ++l) best = std::max(best, std::min(f[k], f[l]));
    return best;
}

struct BrutePassage {
    std::optional<std::size_t> first, last;
};

// scans every ordered pair (a <= b) of exceeding indices
inline BrutePassage passage_brute(std::span<const double> v, double step, double u, double c)
{
    BrutePassage r;
    const std::size_t n = v.size();
    auto exceeds = [&](std::size_t k) { return v[k] - c * (static_cast<double>(k) * step) > u; };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b)
            if (exceeds(a) && exceeds(b)) {
                if (!r.first || a < *r.first) r.first = a;
                if (!r.last || b > *r.last) r.last = b;
            }
    return r;
}

} // namespace rrt::oracle
