#pragma once
//
// Path functionals on uniform grids.
//
//   gamma(x, S; f)       = max_{t in [0,S]}  min(f(t), max_{s in [t+x, 2S]} f(s)),  f on [0, 2S]
//   gamma_prime(x, S; f) = max_{t in [x,S]}  min(f(t), max_{s in [0, t-x]} f(s)),   f on [0, S]
//
// Both run in O(n) using one running-maximum pass. The offset x is snapped
// down to the grid and the snap is reported.
//

#include <cstddef>
#include <span>
#include <vector>

namespace rrt {

struct GridFunction {
    double step;
    std::span<const double> values;

    double span() const noexcept { return static_cast<double>(values.size() - 1) * step; }
};

struct SnappedOffset {
    std::size_t lag;   // j = floor(x / step)
    double snapped;    // j * step
    double snap;       // x - snapped >= 0
};

// floor(x / step) with a relative guard so that x = k * step is never rounded to k - 1.
SnappedOffset snap_offset(double x, double step);

struct FunctionalValue {
    double value;
    SnappedOffset offset;
};

FunctionalValue gamma(double x, double S, const GridFunction& f);
FunctionalValue gamma_prime(double x, double S, const GridFunction& f);

// Index-level kernels used by the estimators: f has 2N+1 (gamma) or N+1
// (gamma_prime) points and lag j <= N.
double gamma_kernel(std::span<const double> f, std::size_t n_half, std::size_t lag);
double gamma_prime_kernel(std::span<const double> f, std::size_t lag);

struct MeanWithError {
    double mean;
    double se;
};

struct ExpTailTransforms {
    MeanWithError pos;   // mean of e^{Y+} - 1
    MeanWithError neg;   // mean of e^{min(Y, 0)}
    MeanWithError full;  // mean of e^{Y}
};

ExpTailTransforms exp_tail_transforms(std::span<const double> samples);

} // namespace rrt
