#include "rrt/stats.hpp"

#include <algorithm>
#include <cmath>

#include "rrt/errors.hpp"

namespace rrt::stats {

double Moments::variance() const noexcept
{
    if (n < 2.0) return 0.0;
    const double m = sum / n;
    return std::max(0.0, (sum2 - n * m * m) / (n - 1.0));
}

double Moments::se() const noexcept { return n > 0 ? std::sqrt(variance() / n) : 0.0; }

Interval wilson(double p, double n, double z)
{
    if (!(n > 0.0)) return {0.0, 1.0};
    p = std::clamp(p, 0.0, 1.0);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double kish_ess(std::span<const double> weights)
{
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

std::vector<SurvivalPoint> weighted_survival(std::vector<WeightedSample> samples,
                                             std::span<const double> x_grid, double scale)
{
    if (!(scale > 0.0)) throw DomainError("weighted_survival: scale must be positive");
    std::sort(samples.begin(), samples.end(), [](const WeightedSample& a, const WeightedSample& b) {
        return a.value != b.value ? a.value < b.value : a.weight < b.weight;
    });
    const std::size_t n = samples.size();
    // tail[i] = sum of weights of samples i..n-1 (ascending order)
    std::vector<double> tail(n + 1, 0.0);
    std::vector<double> w(n);
    for (std::size_t i = n; i-- > 0;) {
        tail[i] = tail[i + 1] + samples[i].weight;
        w[i] = samples[i].weight;
    }
    const double total = tail[0];
    const double ess = kish_ess(w);

    std::vector<SurvivalPoint> out;
    out.reserve(x_grid.size());
    for (double x : x_grid) {
        const double thr = x * scale;
        const auto it = std::lower_bound(samples.begin(), samples.end(), thr,
                                         [](const WeightedSample& s, double t) { return s.value < t; });
        const auto i = static_cast<std::size_t>(it - samples.begin());
        const double s = total > 0.0 ? std::clamp(tail[i] / total, 0.0, 1.0) : 0.0;
        out.push_back({x, s, wilson(s, ess)});
    }
    return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> se)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || se.size() != n) throw DomainError("fit_line: need >= 2 matched points");
    const bool weighted = std::all_of(se.begin(), se.end(), [](double s) { return s > 0.0; });
    std::vector<double> w(n, 1.0);
    if (weighted)
        for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (se[i] * se[i]);
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xm = sx / sw, ym = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - xm) * (x[i] - xm);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    if (!(sxx > 0.0)) throw DomainError("fit_line: abscissae are all equal");
    const double slope = sxy / sxx;
    const double intercept = ym - slope * xm;
    // Var(slope) = sum c_i^2 se_i^2 with c_i = w_i (x_i - xm) / sxx
    double vs = 0, vi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ci = w[i] * (x[i] - xm) / sxx;
        const double di = w[i] / sw - xm * ci;
        vs += ci * ci * se[i] * se[i];
        vi += di * di * se[i] * se[i];
    }
    return {slope, std::sqrt(vs), intercept, std::sqrt(vi)};
}

} // namespace rrt::stats
