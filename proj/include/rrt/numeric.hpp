#pragma once

#include <functional>

namespace rrt::numeric {

struct Bracket {
    double lo;
    double hi;
};

// Root of f on [lo, hi] with f(lo), f(hi) of opposite sign. Bisection with
// secant acceleration (Illinois variant); stops at |hi - lo| <= rel_tol * |x|.
double find_root(const std::function<double(double)>& f, Bracket b,
                 double rel_tol = 1e-13, int max_iter = 400);

// Grows [lo, hi] geometrically around a positive start point until f changes
// sign. Returns false if no sign change within max_expand doublings.
bool expand_bracket(const std::function<double(double)>& f, Bracket& b,
                    int max_expand = 200);

// Golden-section search for a minimum of f on [lo, hi]; returns the argmin.
double golden_section_minimize(const std::function<double(double)>& f, Bracket b,
                               double rel_tol = 1e-10, int max_iter = 300);

// Central difference with relative step h_rel.
double central_difference(const std::function<double(double)>& f, double x,
                          double h_rel = 1e-6);

} // namespace rrt::numeric
