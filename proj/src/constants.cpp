#include "rrt/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rrt/errors.hpp"
#include "rrt/functionals.hpp"
#include "rrt/parallel.hpp"
#include "rrt/rng.hpp"
#include "rrt/stats.hpp"

namespace rrt {

// ---------------------------------------------------------------- eta

EtaSpec EtaSpec::fbm(double hurst)
{
    if (!(hurst > 0.0 && hurst <= 1.0)) throw DomainError(fmt::format("hurst index {} outside (0, 1]", hurst));
    EtaSpec e;
    e.kind = Kind::FbmIndexed;
    e.hurst = hurst;
    return e;
}

EtaSpec EtaSpec::scaled(VarianceSpec spec, double phi)
{
    if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("scaled process needs a finite phi > 0");
    EtaSpec e;
    e.kind = Kind::ScaledProcess;
    e.base = std::move(spec);
    e.phi = phi;
    return e;
}

double EtaSpec::variance(double t) const
{
    if (kind == Kind::FbmIndexed) return std::pow(t, 2.0 * hurst);
    return base->sigma2(phi * t) / base->sigma2(phi);
}

double EtaSpec::local_index() const { return kind == Kind::FbmIndexed ? hurst : base->alpha0(); }

bool EtaSpec::brownian() const
{
    if (kind == Kind::FbmIndexed) return hurst == 0.5;
    return base->is_brownian();
}

VarianceSpec EtaSpec::variance_spec() const
{
    if (kind == Kind::FbmIndexed) return VarianceSpec::power_law(1.0, 2.0 * hurst);
    if (auto p = base->as_single_power()) return VarianceSpec::power_law(1.0, p->two_alpha);
    if (const auto* s = std::get_if<SumOfPowers>(&base->family())) {
        const double norm = base->sigma2(phi);
        std::vector<PowerTerm> terms;
        for (const auto& t : s->terms) terms.push_back({t.a * std::pow(phi, t.two_alpha) / norm, t.two_alpha});
        return VarianceSpec::sum_of_powers(std::move(terms));
    }
    throw ConfigError("scaled process eta is not available for tabulated variance functions");
}

PathGenerator EtaSpec::generator(const GridSpec& grid, GeneratorChoice choice) const
{
    const auto vs = variance_spec();
    if (auto p = vs.as_single_power()) return PathGenerator::for_fbm(p->two_alpha / 2.0, grid, p->a, choice);
    // no fBm shortcut: exact law via the factorised increment covariance
    return PathGenerator::for_spec(vs, grid, choice == GeneratorChoice::Auto ? GeneratorChoice::Cholesky : choice);
}

std::string EtaSpec::describe() const
{
    if (kind == Kind::FbmIndexed) return fmt::format("fbm(H={})", hurst);
    return fmt::format("scaled({}, phi={})", base->describe(), phi);
}

nlohmann::json EtaSpec::to_json() const
{
    if (kind == Kind::FbmIndexed) return {{"kind", "fbm"}, {"hurst", hurst}};
    return {{"kind", "scaled"}, {"variance", base->to_json()}, {"phi", phi}};
}

EtaSpec select_eta(const RiskModel& model)
{
    const auto pc = classify_phi(model.variance);
    switch (pc.kind) {
    case PhiKind::Zero: return EtaSpec::fbm(model.variance.alpha0());
    case PhiKind::Positive: return EtaSpec::scaled(model.variance, pc.phi);
    case PhiKind::Infinite: return EtaSpec::fbm(model.variance.alpha_inf());
    }
    throw NumericalError("select_eta: unreachable");
}

std::string to_string(ConstantKind k)
{
    switch (k) {
    case ConstantKind::HGammaFinite: return "h_gamma";
    case ConstantKind::HGammaRate: return "h_gamma_rate";
    case ConstantKind::Piterbarg: return "piterbarg";
    }
    return "?";
}

nlohmann::json ConstantEstimate::to_json() const
{
    return {{"kind", to_string(kind)},
            {"value", value},
            {"se", se},
            {"levels",
             {{"fine", {{"step", delta}, {"value", fine_value}, {"se", fine_se}}},
              {"coarse", {{"step", 2.0 * delta}, {"value", coarse_value}, {"se", coarse_se}}},
              {"richardson", richardson},
              {"order", richardson_order}}},
            {"config",
             {{"x", x},
              {"x_snapped", x_snapped},
              {"S", S},
              {"delta", delta},
              {"replicas", replicas},
              {"seed", seed},
              {"experiment", experiment}}},
            {"rejected", rejected},
            {"method", method},
            {"process", process},
            {"diagnostics", diagnostics}};
}

nlohmann::json RateEstimate::to_json() const
{
    nlohmann::json per = nlohmann::json::array();
    for (const auto& e : per_S) per.push_back(e.to_json());
    return {{"rate", rate.to_json()},
            {"intercept", intercept},
            {"intercept_se", intercept_se},
            {"endpoint_ratio", endpoint_ratio},
            {"endpoint_se", endpoint_se},
            {"agreement", agreement},
            {"inconsistent", inconsistent},
            {"per_S", per}};
}

// ---------------------------------------------------------------- shared machinery

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSkip = 40.0;  // terms below e^{-40} of the running maximum are dropped

std::size_t steps_in(double S, double delta)
{
    if (!(S > 0.0) || !(delta > 0.0)) throw DomainError("S and delta must be positive");
    const double r = S / delta;
    const double k = std::round(r);
    if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r))
        throw DomainError(fmt::format("delta = {} must divide S = {}", delta, S));
    return static_cast<std::size_t>(k);
}

// log sum_{k in [0, n]} e^{z[k * stride]}
double log_sum_exp(std::span<const double> z, std::size_t n, std::size_t stride = 1)
{
    double zmax = kNegInf;
    for (std::size_t k = 0; k <= n; ++k) zmax = std::max(zmax, z[k * stride]);
    double s = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double e = z[k * stride] - zmax;
        if (e > -kSkip) s += std::exp(e);
    }
    return zmax + std::log(s);
}

// Per-replica values at both levels, reduced in replica order.
struct LevelResults {
    std::size_t n_values;
    std::vector<double> fine, coarse;  // [replica * n_values + k]; NaN marks a rejected replica
    explicit LevelResults(std::size_t replicas, std::size_t nv)
        : n_values(nv), fine(replicas * nv), coarse(replicas * nv)
    {
    }
};

struct Reduced {
    stats::Moments fine, coarse, ext;
    std::size_t rejected = 0;
};

Reduced reduce(const LevelResults& r, std::size_t k, bool richardson, double order)
{
    Reduced out;
    const double w = std::pow(2.0, order);
    const std::size_t reps = r.fine.size() / r.n_values;
    for (std::size_t i = 0; i < reps; ++i) {
        const double f = r.fine[i * r.n_values + k];
        const double c = r.coarse[i * r.n_values + k];
        if (std::isnan(f) || std::isnan(c)) {
            ++out.rejected;
            continue;
        }
        out.fine.add(f);
        out.coarse.add(c);
        out.ext.add(richardson ? (w * f - c) / (w - 1.0) : f);
    }
    return out;
}

void fill_estimate(ConstantEstimate& e, const Reduced& r)
{
    e.fine_value = r.fine.mean();
    e.fine_se = r.fine.se();
    e.coarse_value = r.coarse.mean();
    e.coarse_se = r.coarse.se();
    e.value = r.ext.mean();
    e.se = r.ext.se();
    e.rejected = r.rejected;
    e.diagnostics["refinement_shift"] = e.fine_value - e.coarse_value;
}

void check_rejections(std::size_t rejected, std::size_t replicas, double limit)
{
    if (static_cast<double>(rejected) > limit * static_cast<double>(replicas))
        throw NumericalError(fmt::format("{} of {} replicas overflowed (limit {:.3g}%); use the "
                                         "importance-sampled estimator or smaller S",
                                         rejected, replicas, 100.0 * limit));
}

std::uint64_t experiment_id(const EstimatorOptions& opt, const std::string& label)
{
    return opt.experiment != 0 ? opt.experiment : fnv1a(label);
}

} // namespace

// ---------------------------------------------------------------- H(x, S)

HGammaCurve estimate_h_gamma_curve(const EtaSpec& eta, std::span<const double> xs, double S,
                                   double delta, std::size_t replicas, const EstimatorOptions& opt)
{
    if (xs.empty()) throw DomainError("estimate_h_gamma_curve: empty x list");
    if (replicas < 2) throw DomainError("estimate_h_gamma: need at least 2 replicas");
    const std::size_t N = steps_in(S, delta);
    std::vector<std::size_t> lag_f, lag_c;
    std::vector<SnappedOffset> snaps;
    for (double x : xs) {
        if (!(x >= 0.0) || x > S) throw DomainError(fmt::format("offset x = {} outside [0, S = {}]", x, S));
        const auto off = snap_offset(x, delta);
        snaps.push_back(off);
        lag_f.push_back(std::min(off.lag, N));
        lag_c.push_back(std::min(snap_offset(x, 2.0 * delta).lag, N / 2));
    }
    const bool richardson = opt.richardson && N % 2 == 0;
    const double order = eta.local_index();

    const GridSpec grid{delta, 2 * N + 1};
    const auto gen = eta.generator(grid, opt.generator);
    std::vector<double> var(2 * N + 1);
    for (std::size_t k = 0; k <= 2 * N; ++k) var[k] = eta.variance(grid.time(k));

    const std::string label = fmt::format("h_gamma|{}|S={}|delta={}", eta.describe(), S, delta);
    const std::uint64_t exp_id = experiment_id(opt, label);
    const std::size_t nx = xs.size();
    LevelResults res(replicas, nx);
    const double sqrt2 = std::sqrt(2.0);
    const double count = static_cast<double>(N + 1);

    parallel_for(replicas, opt.threads, [&](std::size_t i) {
        thread_local std::vector<double> path, z, zc;
        path.resize(2 * N + 1);
        z.resize(2 * N + 1);
        RngStream rng(opt.seed, exp_id, i);
        std::size_t tau = 0;
        if (opt.importance)
            tau = static_cast<std::size_t>(std::min<double>(std::floor(rng.uniform() * count), static_cast<double>(N)));
        gen.generate(rng, path);
        for (std::size_t k = 0; k <= 2 * N; ++k) {
            const std::size_t lag = k > tau ? k - tau : tau - k;
            z[k] = opt.importance ? sqrt2 * path[k] + var[tau] - var[lag] : sqrt2 * path[k] - var[k];
        }
        const double log_w = opt.importance ? log_sum_exp(z, N) - std::log(count) : 0.0;
        if (richardson) {
            zc.resize(N + 1);
            for (std::size_t k = 0; k <= N; ++k) zc[k] = z[2 * k];
        }
        for (std::size_t q = 0; q < nx; ++q) {
            const double gf = gamma_kernel(z, N, lag_f[q]);
            double vf = std::exp(gf - log_w);
            double vc = richardson ? std::exp(gamma_kernel(zc, N / 2, lag_c[q]) - log_w) : vf;
            if (!std::isfinite(vf) || !std::isfinite(vc)) vf = vc = std::numeric_limits<double>::quiet_NaN();
            res.fine[i * nx + q] = vf;
            res.coarse[i * nx + q] = vc;
        }
    });

    HGammaCurve out;
    std::vector<Reduced> red;
    for (std::size_t q = 0; q < nx; ++q) {
        red.push_back(reduce(res, q, richardson, order));
        check_rejections(red.back().rejected, replicas, opt.max_reject_fraction);
        ConstantEstimate e;
        e.kind = ConstantKind::HGammaFinite;
        fill_estimate(e, red.back());
        e.richardson = richardson;
        e.richardson_order = order;
        e.x = xs[q];
        e.x_snapped = snaps[q].snapped;
        e.S = S;
        e.delta = delta;
        e.replicas = replicas;
        e.seed = opt.seed;
        e.experiment = exp_id;
        e.method = opt.importance ? "uniform-tilt-mixture" : "plain";
        e.process = eta.describe();
        e.diagnostics["generator"] = gen.id();
        e.diagnostics["x_snap"] = snaps[q].snap;
        out.estimates.push_back(std::move(e));
    }
    // paired standard errors of neighbouring differences
    const double w = std::pow(2.0, order);
    for (std::size_t q = 0; q + 1 < nx; ++q) {
        stats::Moments m;
        for (std::size_t i = 0; i < replicas; ++i) {
            auto ext = [&](std::size_t k) {
                const double f = res.fine[i * nx + k], c = res.coarse[i * nx + k];
                return richardson ? (w * f - c) / (w - 1.0) : f;
            };
            const double a = ext(q), b = ext(q + 1);
            if (!std::isnan(a) && !std::isnan(b)) m.add(a - b);
        }
        out.diff_se.push_back(m.se());
    }
    return out;
}

ConstantEstimate estimate_h_gamma(const EtaSpec& eta, double x, double S, double delta,
                                  std::size_t replicas, const EstimatorOptions& opt)
{
    const double xs[] = {x};
    return std::move(estimate_h_gamma_curve(eta, xs, S, delta, replicas, opt).estimates.front());
}

RateEstimate estimate_h_gamma_rate(const EtaSpec& eta, double x, std::span<const double> S_list,
                                   double delta, std::size_t replicas, const EstimatorOptions& opt)
{
    if (S_list.size() < 3) throw DomainError("estimate_h_gamma_rate: need at least 3 values of S");
    for (std::size_t k = 1; k < S_list.size(); ++k)
        if (!(S_list[k] > S_list[k - 1])) throw DomainError("estimate_h_gamma_rate: S list must increase");

    RateEstimate out;
    std::vector<double> sv, hv, sev;
    for (double S : S_list) {
        EstimatorOptions o = opt;
        o.experiment = fnv1a(fmt::format("h_gamma_rate|{}|x={}|S={}|delta={}|{}", eta.describe(), x, S,
                                         delta, opt.experiment));
        auto e = estimate_h_gamma(eta, x, S, delta, replicas, o);
        sv.push_back(S);
        hv.push_back(e.value);
        sev.push_back(e.se);
        out.per_S.push_back(std::move(e));
    }
    const auto fit = stats::fit_line(sv, hv, sev);
    out.intercept = fit.intercept;
    out.intercept_se = fit.intercept_se;
    out.endpoint_ratio = hv.back() / sv.back();
    out.endpoint_se = sev.back() / sv.back();
    out.inconsistent = !(fit.slope > 0.0);
    out.agreement = std::abs(fit.slope - out.endpoint_ratio) <=
                    3.0 * std::hypot(fit.slope_se, out.endpoint_se);

    auto& r = out.rate;
    r = out.per_S.back();
    r.kind = ConstantKind::HGammaRate;
    r.value = std::max(fit.slope, 0.0);
    r.se = fit.slope_se;
    r.S = sv.back();
    r.fine_value = r.fine_se = r.coarse_value = r.coarse_se = 0.0;
    r.diagnostics = {{"fit", "weighted least squares over S"},
                     {"raw_slope", fit.slope},
                     {"S_list", sv},
                     {"inconsistent", out.inconsistent},
                     {"agreement", out.agreement}};
    return out;
}

// ---------------------------------------------------------------- P^d(x)

ConstantEstimate estimate_piterbarg(double d, double x, double S, double delta, std::size_t replicas,
                                    const EstimatorOptions& opt)
{
    if (!(d > 0.0)) throw DomainError(fmt::format("excess drift d must be positive, got {}", d));
    if (!(x >= 0.0) || x > S) throw DomainError(fmt::format("offset x = {} outside [0, S = {}]", x, S));
    if (replicas < 2) throw DomainError("estimate_piterbarg: need at least 2 replicas");
    const std::size_t N = steps_in(S, delta);
    const auto off = snap_offset(x, delta);
    const std::size_t lag_f = std::min(off.lag, N);
    const std::size_t lag_c = std::min(snap_offset(x, 2.0 * delta).lag, N / 2);
    const bool richardson = opt.richardson && N % 2 == 0;
    constexpr double order = 0.5;

    const GridSpec grid{delta, N + 1};
    const auto gen = PathGenerator::for_fbm(0.5, grid, 1.0, opt.generator);
    // truncated geometric law of the tilt point: p_i = q^i (1 - q) / (1 - q^{N+1})
    const double q = std::exp(-d * delta);
    const double tail = -std::expm1(-d * delta * static_cast<double>(N + 1));  // 1 - q^{N+1}
    const double log_c = std::log(tail) - std::log(-std::expm1(-d * delta));    // log sum_i q^i

    const std::string label = fmt::format("piterbarg|d={}|x={}|S={}|delta={}", d, x, S, delta);
    const std::uint64_t exp_id = experiment_id(opt, label);
    LevelResults res(replicas, 1);
    const double sqrt2 = std::sqrt(2.0);

    // F(W) = e^{Y1+} - 1 + e^{min(Y2, 0)} scaled by e^{-log_w}
    auto integrand = [](double y1, double y2, double log_w) {
        const double pos = y1 > 0.0 ? std::exp(y1 - log_w) * -std::expm1(-y1) : 0.0;
        return pos + std::exp(std::min(y2, 0.0) - log_w);
    };
    auto tail_sup = [](std::span<const double> w, std::size_t from) {
        double m = kNegInf;
        for (std::size_t k = from; k < w.size(); ++k) m = std::max(m, w[k]);
        return m;
    };

    parallel_for(replicas, opt.threads, [&](std::size_t i) {
        thread_local std::vector<double> w, wc;
        w.resize(N + 1);
        RngStream rng(opt.seed, exp_id, i);
        double tau = 0.0;
        if (opt.importance) {
            const double v = rng.uniform();
            const double k = std::floor(std::log1p(-v * tail) / std::log(q));
            tau = std::min(k, static_cast<double>(N)) * delta;
        }
        gen.generate(rng, w);
        for (std::size_t k = 0; k <= N; ++k) {
            const double t = grid.time(k);
            w[k] = sqrt2 * w[k] - (1.0 + d) * t + (opt.importance ? 2.0 * std::min(t, tau) : 0.0);
        }
        const double log_w = opt.importance ? log_sum_exp(w, N) - log_c : 0.0;
        double vf = integrand(gamma_prime_kernel(w, lag_f), tail_sup(w, lag_f), log_w);
        double vc = vf;
        if (richardson) {
            wc.resize(N / 2 + 1);
            for (std::size_t k = 0; k <= N / 2; ++k) wc[k] = w[2 * k];
            vc = integrand(gamma_prime_kernel(wc, lag_c), tail_sup(wc, lag_c), log_w);
        }
        if (!std::isfinite(vf) || !std::isfinite(vc)) vf = vc = std::numeric_limits<double>::quiet_NaN();
        res.fine[i] = vf;
        res.coarse[i] = vc;
    });

    const auto red = reduce(res, 0, richardson, order);
    check_rejections(red.rejected, replicas, opt.max_reject_fraction);
    ConstantEstimate e;
    e.kind = ConstantKind::Piterbarg;
    fill_estimate(e, red);
    e.richardson = richardson;
    e.richardson_order = order;
    e.x = x;
    e.x_snapped = off.snapped;
    e.S = S;
    e.delta = delta;
    e.replicas = replicas;
    e.seed = opt.seed;
    e.experiment = exp_id;
    e.method = opt.importance ? "geometric-tilt-mixture" : "plain";
    e.process = fmt::format("sqrt2*B(t)-(1+{})t", d);
    e.diagnostics["generator"] = gen.id();
    e.diagnostics["x_snap"] = off.snap;
    e.diagnostics["d"] = d;
    e.diagnostics["truncation_ok"] = S >= x + 20.0 / (1.0 + d);
    return e;
}

} // namespace rrt
