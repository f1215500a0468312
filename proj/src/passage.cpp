#include "rrt/passage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rrt/asymptotics.hpp"
#include "rrt/errors.hpp"
#include "rrt/numeric.hpp"
#include "rrt/parallel.hpp"
#include "rrt/rng.hpp"

namespace rrt {

PassageResult extract_passage(std::span<const double> values, const GridSpec& grid, double u, double c)
{
    PassageResult r;
    const std::size_t n = values.size();
    std::size_t first = n, last = n;
    for (std::size_t k = 0; k < n; ++k) {
        if (values[k] - c * grid.time(k) > u) {
            if (first == n) first = k;
            last = k;
        }
    }
    if (first == n) return r;
    r.ruined = true;
    r.first_index = first;
    r.last_index = last;
    r.first = grid.time(first);
    r.last = grid.time(last);
    r.recovery = static_cast<double>(last - first) * grid.step;
    return r;
}

PassageResult extract_passage(const PathSample& path, double u, double c)
{
    return extract_passage(path.values, path.grid, u, c);
}

InfiniteWindow infinite_window(const RiskModel& model, double u, double safety, double tail_eps)
{
    if (!(u > 0.0)) throw DomainError("infinite_window: u must be positive");
    if (!(tail_eps > 0.0 && tail_eps < 1.0)) throw DomainError("infinite_window: tail_eps must lie in (0, 1)");
    const auto k = infinite_constants(model);
    const auto mn = k.minimize(u);
    InfiniteWindow w;
    w.m = mn.m;
    w.centre = u * mn.t_u;
    w.half_width = mn.m > 1.0 ? u * std::log(mn.m) / mn.m : u / mn.m;
    const double c = model.drift_c;
    const auto& spec = model.variance;
    const double target = mn.m * mn.m + 2.0 * std::log(1.0 / tail_eps);
    std::function<double(double)> excess = [&](double t) {
        const double l = (u + c * t) / spec.sigma(t);
        return l * l - target;
    };
    numeric::Bracket b{w.centre, 2.0 * w.centre + 1.0};
    if (!numeric::expand_bracket(excess, b))
        throw NumericalError("infinite_window: tail point not bracketed");
    const double t_tail = excess(b.lo) >= 0.0 ? b.lo : numeric::find_root(excess, b, 1e-10);
    w.t_end = std::max(w.centre + safety * w.half_width, t_tail);
    return w;
}

std::string to_string(ConditioningMethod m)
{
    switch (m) {
    case ConditioningMethod::Auto: return "auto";
    case ConditioningMethod::Rejection: return "rejection";
    case ConditioningMethod::Mixture: return "mixture";
    }
    return "?";
}

ConditioningMethod conditioning_from_string(const std::string& s)
{
    if (s == "auto") return ConditioningMethod::Auto;
    if (s == "rejection") return ConditioningMethod::Rejection;
    if (s == "mixture") return ConditioningMethod::Mixture;
    throw ConfigError("unknown conditioning method '" + s + "'");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Slot {
    double recovery = kNaN;  // NaN: not ruined
    double weight = 0.0;
};

// Discrete law over grid points proportional to Psi(m_j), kept in log space.
struct MixtureLaw {
    std::vector<double> cdf;
    std::vector<double> level;  // m_j
    double log_mass = -std::numeric_limits<double>::infinity();
    double max_point_prob = 0.0;
};

MixtureLaw mixture_law(const RiskModel& model, double u, const GridSpec& grid)
{
    MixtureLaw law;
    const std::size_t n = grid.n_points;
    law.level.assign(n, std::numeric_limits<double>::infinity());
    std::vector<double> lp(n, -std::numeric_limits<double>::infinity());
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
        const double t = grid.time(k);
        law.level[k] = (u + model.drift_c * t) / model.variance.sigma(t);
        lp[k] = log_psi(law.level[k]);
        lmax = std::max(lmax, lp[k]);
    }
    law.cdf.resize(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += std::exp(lp[k] - lmax);
        law.cdf[k] = acc;
    }
    for (auto& v : law.cdf) v /= acc;
    law.log_mass = lmax + std::log(acc);
    law.max_point_prob = std::exp(lmax);
    return law;
}

} // namespace

RecoverySamples conditional_recovery_sample(const RiskModel& model, double u, const GridSpec& grid,
                                            std::size_t replicas, const RecoveryOptions& opt)
{
    if (replicas < 1) throw DomainError("conditional_recovery_sample: replicas must be >= 1");
    grid.validate();
    if (grid.origin != 0.0) throw DomainError("conditional_recovery_sample: grid must start at 0");
    if (model.horizon.is_finite() && grid.span() > *model.horizon.T * (1.0 + 1e-12))
        throw DomainError("conditional_recovery_sample: grid extends beyond the horizon");

    const auto gen = PathGenerator::for_spec(model.variance, grid, opt.generator);
    const double c = model.drift_c;

    ConditioningMethod method = opt.method;
    MixtureLaw law;
    if (method != ConditioningMethod::Rejection && u > 0.0) {
        law = mixture_law(model, u, grid);
        if (method == ConditioningMethod::Auto)
            method = law.max_point_prob < opt.auto_threshold ? ConditioningMethod::Mixture
                                                             : ConditioningMethod::Rejection;
    } else if (method == ConditioningMethod::Mixture) {
        throw DomainError("mixture conditioning needs u > 0");
    } else {
        method = ConditioningMethod::Rejection;
    }

    std::vector<Slot> slots(replicas);
    std::vector<double> s2;
    if (method == ConditioningMethod::Mixture) {
        s2.resize(grid.n_points);
        for (std::size_t k = 0; k < grid.n_points; ++k) s2[k] = model.variance.sigma2(grid.time(k));
    }

    parallel_for(replicas, opt.threads, [&](std::size_t i) {
        thread_local std::vector<double> path;
        path.resize(grid.n_points);
        RngStream rng(opt.seed, opt.experiment, i);
        if (method == ConditioningMethod::Rejection) {
            gen.generate(rng, path);
            const auto r = extract_passage(path, grid, u, c);
            if (r.ruined) slots[i] = {*r.recovery, 1.0};
            return;
        }
        const double v = rng.uniform();
        const auto j = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::lower_bound(law.cdf.begin(), law.cdf.end(), v) - law.cdf.begin(),
                                     static_cast<std::ptrdiff_t>(grid.n_points - 1)));
        const double sj2 = s2[j];
        const double xi = std::sqrt(sj2) * rng.normal_tail(law.level[j]);
        gen.generate(rng, path);
        const double shift = (xi - path[j]) / sj2;
        std::size_t first = grid.n_points, last = 0, count = 0;
        for (std::size_t k = 0; k < grid.n_points; ++k) {
            const std::size_t lag = k > j ? k - j : j - k;
            double x = path[k] + 0.5 * (s2[k] + sj2 - s2[lag]) * shift;
            if (k == j) x = xi;
            if (x - c * grid.time(k) > u) {
                if (first == grid.n_points) first = k;
                last = k;
                ++count;
            }
        }
        slots[i] = {static_cast<double>(last - first) * grid.step, 1.0 / static_cast<double>(count)};
    });

    RecoverySamples out;
    out.replicas = replicas;
    out.method = method;
    out.generator = gen.id();
    stats::Moments w_moments;
    std::vector<double> weights;
    for (const auto& s : slots) {
        w_moments.add(std::isnan(s.recovery) ? 0.0 : s.weight);
        if (std::isnan(s.recovery)) continue;
        out.samples.push_back({s.recovery, s.weight});
        weights.push_back(s.weight);
    }
    out.accepted = out.samples.size();
    out.acceptance_rate = static_cast<double>(out.accepted) / static_cast<double>(replicas);
    out.ess = stats::kish_ess(weights);
    if (method == ConditioningMethod::Rejection) {
        out.ruin_prob = w_moments.mean();
        out.ruin_prob_se = w_moments.se();
    } else {
        const double mass = std::exp(law.log_mass);
        out.ruin_prob = mass * w_moments.mean();
        out.ruin_prob_se = mass * w_moments.se();
    }
    if (out.accepted == 0) {
        out.no_ruin = true;
        out.acceptance_upper_bound = std::min(1.0, 3.0 / static_cast<double>(replicas));
    }
    return out;
}

} // namespace rrt
