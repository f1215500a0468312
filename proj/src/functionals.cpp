#include "rrt/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rrt/errors.hpp"

namespace rrt {

namespace {

std::size_t grid_count(double length, double step)
{
    const double r = length / step;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * std::max(1.0, r))
        throw DomainError(fmt::format("span {} is not a multiple of the grid step {}", length, step));
    return static_cast<std::size_t>(k);
}

void check_offset(double x, double S)
{
    if (!(x >= 0.0)) throw DomainError(fmt::format("offset x must be >= 0, got {}", x));
    if (x > S) throw DomainError(fmt::format("offset x = {} exceeds S = {}", x, S));
}

} // namespace

SnappedOffset snap_offset(double x, double step)
{
    if (!(step > 0.0)) throw DomainError("snap_offset: step must be positive");
    if (!(x >= 0.0)) throw DomainError("snap_offset: x must be >= 0");
    const double r = x / step;
    auto j = static_cast<std::size_t>(std::floor(r + 1e-9 * std::max(1.0, r)));
    const double snapped = static_cast<double>(j) * step;
    return {j, snapped, std::max(0.0, x - snapped)};
}

double gamma_kernel(std::span<const double> f, std::size_t n_half, std::size_t lag)
{
    const std::size_t last = 2 * n_half;
    // suffix max over [k + lag, 2N], grown as k decreases
    double smax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = n_half + lag; i <= last; ++i) smax = std::max(smax, f[i]);
    double best = std::min(f[n_half], smax);
    for (std::size_t k = n_half; k-- > 0;) {
        smax = std::max(smax, f[k + lag]);
        best = std::max(best, std::min(f[k], smax));
    }
    return best;
}

double gamma_prime_kernel(std::span<const double> f, std::size_t lag)
{
    const std::size_t n = f.size() - 1;
    double pmax = -std::numeric_limits<double>::infinity();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lag; k <= n; ++k) {
        pmax = std::max(pmax, f[k - lag]);
        best = std::max(best, std::min(f[k], pmax));
    }
    return best;
}

FunctionalValue gamma(double x, double S, const GridFunction& f)
{
    check_offset(x, S);
    const std::size_t n_half = grid_count(S, f.step);
    if (f.values.size() != 2 * n_half + 1)
        throw DomainError(fmt::format("gamma: f must cover [0, 2S] ({} points), got {}", 2 * n_half + 1,
                                      f.values.size()));
    const auto off = snap_offset(x, f.step);
    const std::size_t lag = std::min(off.lag, n_half);
    return {gamma_kernel(f.values, n_half, lag), off};
}

FunctionalValue gamma_prime(double x, double S, const GridFunction& f)
{
    check_offset(x, S);
    const std::size_t n = grid_count(S, f.step);
    if (f.values.size() != n + 1)
        throw DomainError(fmt::format("gamma_prime: f must cover [0, S] ({} points), got {}", n + 1,
                                      f.values.size()));
    const auto off = snap_offset(x, f.step);
    return {gamma_prime_kernel(f.values, std::min(off.lag, n)), off};
}

ExpTailTransforms exp_tail_transforms(std::span<const double> samples)
{
    if (samples.empty()) throw DomainError("exp_tail_transforms: empty sample list");
    struct Acc {
        double s = 0.0, s2 = 0.0;
        void add(double v) { s += v; s2 += v * v; }
        MeanWithError get(double n) const
        {
            const double m = s / n;
            const double var = n > 1 ? std::max(0.0, (s2 - n * m * m) / (n - 1)) : 0.0;
            return {m, std::sqrt(var / n)};
        }
    } pos, neg, full;
    for (double y : samples) {
        pos.add(std::expm1(std::max(y, 0.0)));
        neg.add(std::exp(std::min(y, 0.0)));
        full.add(std::exp(y));
    }
    const double n = static_cast<double>(samples.size());
    return {pos.get(n), neg.get(n), full.get(n)};
}

} // namespace rrt
