#include "rrt/numeric.hpp"

#include <cmath>
#include <utility>

#include "rrt/errors.hpp"

namespace rrt::numeric {

double find_root(const std::function<double(double)>& f, Bracket b, double rel_tol,
                 int max_iter)
{
    double lo = b.lo, hi = b.hi;
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw NumericalError("find_root: bracket does not straddle a sign change");

    // Illinois regula falsi, falling back to bisection when the interpolated
    // point stalls near an end.
    int side = 0;
    for (int it = 0; it < max_iter; ++it) {
        double x = (lo * fhi - hi * flo) / (fhi - flo);
        const double width = hi - lo;
        if (!(x > lo + 0.01 * width && x < hi - 0.01 * width)) x = 0.5 * (lo + hi);
        const double fx = f(x);
        if (fx == 0.0) return x;
        if ((fx > 0) == (fhi > 0)) {
            hi = x;
            fhi = fx;
            if (side == -1) flo *= 0.5;
            side = -1;
        } else {
            lo = x;
            flo = fx;
            if (side == 1) fhi *= 0.5;
            side = 1;
        }
        const double scale = std::max(std::abs(lo), std::abs(hi));
        if (hi - lo <= rel_tol * scale) break;
    }
    return 0.5 * (lo + hi);
}

bool expand_bracket(const std::function<double(double)>& f, Bracket& b, int max_expand)
{
    double flo = f(b.lo), fhi = f(b.hi);
    for (int i = 0; i < max_expand; ++i) {
        if ((flo > 0) != (fhi > 0) || flo == 0.0 || fhi == 0.0) return true;
        b.lo *= 0.5;
        b.hi *= 2.0;
        flo = f(b.lo);
        fhi = f(b.hi);
    }
    return (flo > 0) != (fhi > 0);
}

double golden_section_minimize(const std::function<double(double)>& f, Bracket b,
                               double rel_tol, int max_iter)
{
    constexpr double invphi = 0.6180339887498949;
    double a = b.lo, d = b.hi;
    double x1 = d - invphi * (d - a);
    double x2 = a + invphi * (d - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < max_iter; ++it) {
        if (d - a <= rel_tol * std::max(std::abs(x1), std::abs(x2))) break;
        if (f1 < f2) {
            d = x2;
            x2 = x1;
            f2 = f1;
            x1 = d - invphi * (d - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (d - a);
            f2 = f(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

double central_difference(const std::function<double(double)>& f, double x, double h_rel)
{
    const double h = h_rel * std::max(std::abs(x), 1e-300);
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace rrt::numeric
