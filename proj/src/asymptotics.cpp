#include "rrt/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "rrt/errors.hpp"
#include "rrt/numeric.hpp"

namespace rrt {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

} // namespace

double psi(double x)
{
    // z = x / sqrt2 carries a rounding error that erfc amplifies by ~z^2 in
    // the tail; correct to first order with the exact residual.
    constexpr double sqrt2_lo = -9.667293313452913e-17;  // sqrt2 - double(sqrt2)
    const double z = x / std::numbers::sqrt2;
    const double r = (std::fma(-z, std::numbers::sqrt2, x) - z * sqrt2_lo) / std::numbers::sqrt2;
    return 0.5 * (std::erfc(z) - r * (2.0 / std::sqrt(kPi)) * std::exp(-z * z));
}

double log_psi(double x)
{
    if (x < 30.0) return std::log(psi(x));
    // log phi(x) - log x + log(sum_k (-1)^k (2k-1)!! / x^{2k}), summed to its smallest term
    const double x2 = x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 400; ++k) {
        const double next = -term * (2.0 * k - 1.0) / x2;
        if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-18) break;
        term = next;
        sum += term;
    }
    return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(x) + std::log(sum);
}

// ---------------------------------------------------------------- infinite horizon

InfiniteHorizonConstants::InfiniteHorizonConstants(VarianceSpec spec, double c)
    : spec_(std::move(spec)), c_(c)
{
    const double al = spec_.alpha_inf();
    t_star = al / (c_ * (1.0 - al));
    A = std::pow(t_star, -al) / (1.0 - al);
    B = std::pow(t_star, -al - 2.0) * al;
}

InfiniteHorizonConstants infinite_constants(const RiskModel& model)
{
    if (model.horizon.is_finite()) throw DomainError("infinite_constants: model has a finite horizon");
    const double al = model.variance.alpha_inf();
    if (!(al > 0.0 && al < 1.0))
        throw DomainError(fmt::format("infinite horizon needs alpha_inf in (0, 1), got {}", al));
    return InfiniteHorizonConstants(model.variance, model.drift_c);
}

Minimizer InfiniteHorizonConstants::minimize(double u) const
{
    if (!(u > 0.0)) throw DomainError(fmt::format("level u must be positive, got {}", u));
    // objective in s = ln t; u factor restored at the end
    auto obj = [&](double s) {
        const double t = std::exp(s);
        return std::log1p(c_ * t) - 0.5 * std::log(spec_.sigma2(u * t));
    };
    // d/dt of the log objective
    auto slope = [&](double t) {
        return c_ / (1.0 + c_ * t) - u * spec_.dsigma2(u * t) / (2.0 * spec_.sigma2(u * t));
    };

    // log-spaced scan for bracket candidates
    const double centre = std::log(t_star);
    constexpr int kScan = 801;
    constexpr double kHalfWidth = 12.0 * std::numbers::ln10;
    std::vector<double> s(kScan), f(kScan);
    for (int i = 0; i < kScan; ++i) {
        s[i] = centre - kHalfWidth + 2.0 * kHalfWidth * i / (kScan - 1);
        f[i] = obj(s[i]);
    }
    int minima = 0, at = -1;
    for (int i = 1; i + 1 < kScan; ++i) {
        if (f[i] < f[i - 1] && f[i] <= f[i + 1]) {
            ++minima;
            if (at < 0 || f[i] < f[at]) at = i;
        }
    }
    if (minima != 1)
        throw NumericalError(fmt::format(
            "t -> u(1+ct)/sigma(ut) at u = {} has {} local minima on the scan; the variance "
            "function violates the regular-variation assumption that makes the minimiser unique",
            u, minima));

    const double s_hat = numeric::golden_section_minimize(obj, {s[at - 1], s[at + 1]}, 1e-10);
    double t = std::exp(s_hat);
    // polish on the derivative
    double lo = std::exp(s[at - 1]), hi = std::exp(s[at + 1]);
    const auto slope_fn = std::function<double(double)>(slope);
    if (slope(lo) < 0.0 && slope(hi) > 0.0) t = numeric::find_root(slope_fn, {lo, hi}, 1e-13);
    return {t, u * std::exp(obj(std::log(t)))};
}

double InfiniteHorizonConstants::delta(double u) const
{
    if (!(u > 0.0)) throw DomainError("delta: u must be positive");
    const double y = std::numbers::sqrt2 * spec_.sigma2(u * t_star) / (u * (1.0 + c_ * t_star));
    return sigma_inverse(spec_, y);
}

double InfiniteHorizonConstants::log_theta(double u) const
{
    const auto mn = minimize(u);
    return 0.5 * std::log(2.0 * A * kPi / B) + std::log(u / (mn.m * delta(u))) + log_psi(mn.m);
}

double InfiniteHorizonConstants::theta(double u) const { return std::exp(log_theta(u)); }

double InfiniteHorizonConstants::expansion_ratio(double u, double t) const
{
    const auto mn = minimize(u);
    const double sigma_u = spec_.sigma(u * t) * mn.m / (u * (1.0 + c_ * t));
    const double dt = t - mn.t_u;
    if (dt == 0.0) throw DomainError("expansion_ratio: t must differ from t_u");
    return (1.0 - sigma_u) / ((B / (2.0 * A)) * dt * dt);
}

// ---------------------------------------------------------------- finite horizon

std::string to_string(FiniteCase c)
{
    switch (c) {
    case FiniteCase::I: return "i";
    case FiniteCase::II: return "ii";
    case FiniteCase::III: return "iii";
    }
    return "?";
}

FiniteHorizonConstants finite_constants(const RiskModel& model)
{
    if (!model.horizon.is_finite()) throw DomainError("finite_constants: model has an infinite horizon");
    const double T = *model.horizon.T;
    if (!(T > 0.0) || T > model.variance.domain_max())
        throw DomainError(fmt::format("horizon T = {} outside the variance domain", T));
    FiniteHorizonConstants k(model.variance);
    k.T = T;
    k.c = model.drift_c;
    k.sigma_T = model.variance.sigma(T);
    k.sigma_dot_T = model.variance.sigma_dot(T);
    if (!(k.sigma_dot_T > 0.0))
        throw NumericalError(fmt::format("sigma must be strictly increasing at T; got derivative {}",
                                         k.sigma_dot_T));
    const double e = 2.0 * model.variance.alpha0();
    if (e < 1.0) {
        k.case_tag = FiniteCase::I;
    } else if (e > 1.0) {
        k.case_tag = FiniteCase::III;
    } else {
        k.case_tag = FiniteCase::II;
        k.a = model.variance.linear_coefficient_at_zero();
        if (!k.a || !(*k.a > 0.0))
            throw ConfigError("alpha0 = 1/2 requires a positive linear coefficient of sigma^2 at 0");
        k.d = 2.0 * k.sigma_T * k.sigma_dot_T / *k.a;
    }
    return k;
}

double FiniteHorizonConstants::delta1(double u) const
{
    return sigma_inverse(spec_, std::numbers::sqrt2 * sigma_T * sigma_T / (u + c * T));
}

double FiniteHorizonConstants::delta2(double u) const
{
    const double r = sigma_T / (u + c * T);
    return r * r;
}

double FiniteHorizonConstants::delta(double u) const
{
    return case_tag == FiniteCase::III ? delta2(u) : delta1(u);
}

double FiniteHorizonConstants::theta1(double u) const
{
    const double s3 = sigma_T * sigma_T * sigma_T;
    return std::exp(std::log(s3 / sigma_dot_T) - std::log(u * u * delta1(u)) + log_psi(level(u)));
}

// ---------------------------------------------------------------- ruin asymptotics

Asymptotic ruin_prob_infinite(const RiskModel& model, double u, double h_estimate)
{
    if (!(h_estimate > 0.0)) throw DomainError("ruin_prob_infinite: H estimate must be positive");
    const auto k = infinite_constants(model);
    const double v = h_estimate * k.theta(u);
    return {v, v > 1.0};
}

Asymptotic ruin_prob_finite(const RiskModel& model, double u, std::optional<double> h0,
                            std::optional<double> piterbarg0)
{
    const auto k = finite_constants(model);
    double v = 0.0;
    switch (k.case_tag) {
    case FiniteCase::I:
        if (!h0) throw MissingConstantError("finite horizon case i needs an estimate of H(0)");
        if (!(*h0 > 0.0)) throw DomainError("H(0) estimate must be positive");
        v = *h0 * k.theta1(u);
        break;
    case FiniteCase::II:
        v = piterbarg0.value_or(1.0 + 1.0 / *k.d) * psi(k.level(u));
        break;
    case FiniteCase::III:
        v = psi(k.level(u));
        break;
    }
    return {v, v > 1.0};
}

// ---------------------------------------------------------------- limit laws

std::optional<double> ConstantTable::at(double x) const
{
    if (points.empty()) return std::nullopt;
    auto pts = points;
    std::sort(pts.begin(), pts.end());
    for (const auto& [px, pv] : pts)
        if (is_close(px, x)) return pv;
    if (x < pts.front().first || x > pts.back().first) return std::nullopt;
    const auto it = std::upper_bound(pts.begin(), pts.end(), x,
                                     [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

std::string regime_name(const RiskModel& model)
{
    if (!model.horizon.is_finite()) return "infinite";
    return to_string(finite_constants(model).case_tag);
}

namespace {

double ratio_from(const ConstantTable& table, double x, std::optional<double> zero_default,
                  const char* what)
{
    const auto num = table.at(x);
    auto den = table.at(0.0);
    if (!den) den = zero_default;
    if (!num && x == 0.0 && den) return 1.0;
    if (!num || !den) throw MissingConstantError(fmt::format("no {} estimate available at x = {}", what, !num ? x : 0.0));
    if (!(*den > 0.0)) throw DomainError(fmt::format("{} at 0 must be positive", what));
    return *num / *den;
}

} // namespace

double limit_G(const RiskModel& model, double x, const LimitConstants& constants)
{
    if (!(x >= 0.0)) throw DomainError(fmt::format("limit_G: x must be >= 0, got {}", x));
    if (!model.horizon.is_finite()) {
        if (x == 0.0) return 1.0;
        return ratio_from(constants.h_gamma, x, std::nullopt, "H");
    }
    const auto k = finite_constants(model);
    switch (k.case_tag) {
    case FiniteCase::I:
        if (x == 0.0) return 1.0;
        return ratio_from(constants.h_gamma, x, std::nullopt, "H");
    case FiniteCase::II:
        if (x == 0.0) return 1.0;
        return ratio_from(constants.piterbarg, x, 1.0 + 1.0 / *k.d, "P^d");
    case FiniteCase::III:
        return std::exp(-(k.sigma_dot_T / k.sigma_T) * x);
    }
    return 1.0;
}

nlohmann::json Prediction::to_json() const
{
    nlohmann::json g = nlohmann::json::array();
    for (const auto& [x, v] : G) g.push_back({x, v ? nlohmann::json(*v) : nlohmann::json(nullptr)});
    return {{"u", u},
            {"case", regime},
            {"Delta", delta},
            {"Theta", theta},
            {"predicted_ruin_prob", ruin_prob ? nlohmann::json(*ruin_prob) : nlohmann::json(nullptr)},
            {"pre_asymptotic", pre_asymptotic},
            {"G", g}};
}

Prediction predict(const RiskModel& model, double u, std::span<const double> x_grid,
                   const LimitConstants& constants)
{
    Prediction p;
    p.u = u;
    p.regime = regime_name(model);
    if (!model.horizon.is_finite()) {
        const auto k = infinite_constants(model);
        p.delta = k.delta(u);
        p.theta = k.theta(u);
        // H(0) = 1 is exact when sigma^2 is linear
        std::optional<double> h0 = constants.h_gamma.at(0.0);
        if (!h0 && model.variance.is_brownian()) h0 = 1.0;
        if (h0) {
            const auto r = ruin_prob_infinite(model, u, *h0);
            p.ruin_prob = r.value;
            p.pre_asymptotic = r.pre_asymptotic;
        }
    } else {
        const auto k = finite_constants(model);
        p.delta = k.delta(u);
        p.theta = k.case_tag == FiniteCase::I ? k.theta1(u) : psi(k.level(u));
        try {
            const auto r = ruin_prob_finite(model, u, constants.h_gamma.at(0.0), constants.piterbarg.at(0.0));
            p.ruin_prob = r.value;
            p.pre_asymptotic = r.pre_asymptotic;
        } catch (const MissingConstantError&) {
        }
    }
    for (double x : x_grid) {
        try {
            p.G.emplace_back(x, limit_G(model, x, constants));
        } catch (const MissingConstantError&) {
            p.G.emplace_back(x, std::nullopt);
        }
    }
    return p;
}

} // namespace rrt
