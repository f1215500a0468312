#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rrt::stats {

// Sum / sum-of-squares accumulator; merge() is exact when applied in a fixed order.
struct Moments {
    double n = 0.0;
    double sum = 0.0;
    double sum2 = 0.0;

    void add(double v) noexcept { n += 1.0; sum += v; sum2 += v * v; }
    void merge(const Moments& o) noexcept { n += o.n; sum += o.sum; sum2 += o.sum2; }
    double mean() const noexcept { return n > 0 ? sum / n : 0.0; }
    double variance() const noexcept;  // unbiased
    double se() const noexcept;
};

struct Interval {
    double lo;
    double hi;
};

// Wilson score interval for a proportion p observed on n (possibly effective) trials.
Interval wilson(double p, double n, double z = 1.959963984540054);

// Kish effective sample size (sum w)^2 / sum w^2.
double kish_ess(std::span<const double> weights);

struct WeightedSample {
    double value;
    double weight;
};

struct SurvivalPoint {
    double x;
    double survival;
    Interval ci;
};

// S(x) = sum_i w_i 1{v_i >= x * scale} / sum_i w_i, with Wilson intervals on the
// Kish effective size. Samples are sorted internally, so the result does not
// depend on input order.
std::vector<SurvivalPoint> weighted_survival(std::vector<WeightedSample> samples,
                                             std::span<const double> x_grid, double scale);

// Least squares y = slope * x + intercept with standard errors propagated from
// per-point standard errors (weighted by 1/se^2 when all se > 0).
struct LineFit {
    double slope;
    double slope_se;
    double intercept;
    double intercept_se;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> se);

} // namespace rrt::stats
