#include "rrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "rrt/errors.hpp"
#include "rrt/numeric.hpp"

namespace rrt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_term(const PowerTerm& p)
{
    if (!(p.a > 0.0) || !std::isfinite(p.a))
        throw ConfigError(fmt::format("power term prefactor must be positive, got {}", p.a));
    if (!(p.two_alpha > 0.0 && p.two_alpha <= 2.0))
        throw ConfigError(fmt::format("power term exponent 2*alpha must lie in (0, 2], got {}",
                                      p.two_alpha));
}

// Fritsch-Carlson slopes for a monotone cubic Hermite interpolant.
std::vector<double> monotone_slopes(const std::vector<double>& t, const std::vector<double>& v)
{
    const std::size_t n = t.size();
    std::vector<double> h(n - 1), delta(n - 1), m(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = t[i + 1] - t[i];
        delta[i] = (v[i + 1] - v[i]) / h[i];
    }
    if (n == 2) {
        m[0] = m[1] = delta[0];
        return m;
    }
    // three-point end formulas, clamped to preserve monotonicity
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0) s = 0;
        else if (d0 * d1 <= 0 && std::abs(s) > std::abs(3 * d0)) s = 3 * d0;
        return s;
    };
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0) {
            m[i] = 0;
        } else {
            const double w1 = 2 * h[i] + h[i - 1];
            const double w2 = h[i] + 2 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    return m;
}

double hermite(const std::vector<double>& t, const std::vector<double>& v,
               const std::vector<double>& m, double x)
{
    const std::size_t n = t.size();
    std::size_t i;
    if (x <= t.front()) i = 0;
    else if (x >= t.back()) i = n - 2;
    else i = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    const double h = t[i + 1] - t[i];
    const double s = (x - t[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * v[i] + h10 * h * m[i] + h01 * v[i + 1] + h11 * h * m[i + 1];
}

} // namespace

VarianceSpec::VarianceSpec(Family f) : family_(std::move(f)) {}

VarianceSpec VarianceSpec::power_law(double a, double two_alpha)
{
    PowerTerm p{a, two_alpha};
    check_term(p);
    VarianceSpec s(PowerLaw{p});
    s.alpha0_ = s.alpha_inf_ = two_alpha / 2.0;
    return s;
}

VarianceSpec VarianceSpec::sum_of_powers(std::vector<PowerTerm> terms)
{
    if (terms.empty()) throw ConfigError("sum of powers needs at least one term");
    double lo = kInf, hi = 0.0;
    for (const auto& p : terms) {
        check_term(p);
        lo = std::min(lo, p.two_alpha);
        hi = std::max(hi, p.two_alpha);
    }
    VarianceSpec s(SumOfPowers{std::move(terms)});
    s.alpha0_ = lo / 2.0;
    s.alpha_inf_ = hi / 2.0;
    return s;
}

VarianceSpec VarianceSpec::tabulated(std::vector<double> t, std::vector<double> v,
                                     double alpha0, double alpha_inf)
{
    if (t.size() != v.size() || t.size() < 2)
        throw ConfigError("tabulated variance needs >= 2 matching (t, v) samples");
    if (t.front() != 0.0 || v.front() != 0.0)
        throw ConfigError("tabulated variance must start at (0, 0)");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) throw ConfigError("tabulated knots must be strictly increasing");
        if (!(v[i] > v[i - 1])) throw ConfigError("tabulated variance must be strictly increasing");
    }
    if (!(alpha0 > 0.0 && alpha0 <= 1.0) || !(alpha_inf > 0.0 && alpha_inf <= 1.0))
        throw ConfigError("tabulated indices alpha0, alpha_inf must lie in (0, 1]");
    auto slopes = monotone_slopes(t, v);
    VarianceSpec s(TabulatedMonotone{std::move(t), std::move(v), alpha0, alpha_inf});
    s.alpha0_ = alpha0;
    s.alpha_inf_ = alpha_inf;
    s.slopes_ = std::move(slopes);
    return s;
}

double VarianceSpec::domain_max() const noexcept
{
    if (const auto* tab = std::get_if<TabulatedMonotone>(&family_)) return tab->t.back();
    return kInf;
}

bool VarianceSpec::bounded() const noexcept
{
    return std::holds_alternative<TabulatedMonotone>(family_);
}

double VarianceSpec::sigma2(double t) const
{
    if (!(t >= 0.0)) throw DomainError(fmt::format("sigma2: time must be >= 0, got {}", t));
    if (t == 0.0) return 0.0;
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return f.term.a * std::pow(t, f.term.two_alpha);
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                double s = 0.0;
                for (const auto& p : f.terms) s += p.a * std::pow(t, p.two_alpha);
                return s;
            } else {
                if (t > f.t.back())
                    throw DomainError(fmt::format("sigma2: t = {} beyond tabulated domain [0, {}]",
                                                  t, f.t.back()));
                return hermite(f.t, f.v, slopes_, t);
            }
        },
        family_);
}

double VarianceSpec::sigma(double t) const { return std::sqrt(sigma2(t)); }

double VarianceSpec::dsigma2(double t) const
{
    if (!(t > 0.0)) throw DomainError("dsigma2: time must be > 0");
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return f.term.a * f.term.two_alpha * std::pow(t, f.term.two_alpha - 1.0);
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                double s = 0.0;
                for (const auto& p : f.terms) s += p.a * p.two_alpha * std::pow(t, p.two_alpha - 1.0);
                return s;
            } else {
                if (t > f.t.back()) throw DomainError("dsigma2: t beyond tabulated domain");
                // interpolant is extended cubically past the last knot for the +h probe
                auto g = [&](double x) { return hermite(f.t, f.v, slopes_, x); };
                return numeric::central_difference(g, t, 1e-6);
            }
        },
        family_);
}

double VarianceSpec::sigma_dot(double t) const { return dsigma2(t) / (2.0 * sigma(t)); }

std::optional<PowerTerm> VarianceSpec::as_single_power() const
{
    if (const auto* p = std::get_if<PowerLaw>(&family_)) return p->term;
    if (const auto* s = std::get_if<SumOfPowers>(&family_)) {
        const double e = s->terms.front().two_alpha;
        double a = 0.0;
        for (const auto& p : s->terms) {
            if (p.two_alpha != e) return std::nullopt;
            a += p.a;
        }
        return PowerTerm{a, e};
    }
    return std::nullopt;
}

bool VarianceSpec::is_brownian() const
{
    const auto p = as_single_power();
    return p && p->two_alpha == 1.0;
}

std::optional<double> VarianceSpec::linear_coefficient_at_zero() const
{
    if (alpha0_ != 0.5) return std::nullopt;
    return std::visit(
        [&](const auto& f) -> std::optional<double> {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return f.term.a;
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                double a = 0.0;
                for (const auto& p : f.terms)
                    if (p.two_alpha == 1.0) a += p.a;
                return a;
            } else {
                return slopes_.front();
            }
        },
        family_);
}

std::string VarianceSpec::describe() const
{
    return std::visit(
        [](const auto& f) -> std::string {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return fmt::format("power(a={}, 2alpha={})", f.term.a, f.term.two_alpha);
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                std::string s = "sum(";
                for (std::size_t i = 0; i < f.terms.size(); ++i)
                    s += fmt::format("{}{}*t^{}", i ? " + " : "", f.terms[i].a, f.terms[i].two_alpha);
                return s + ")";
            } else {
                return fmt::format("tabulated({} knots on [0, {}])", f.t.size(), f.t.back());
            }
        },
        family_);
}

nlohmann::json VarianceSpec::to_json() const
{
    using nlohmann::json;
    return std::visit(
        [](const auto& f) -> json {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return json{{"family", "power"}, {"a", f.term.a}, {"two_alpha", f.term.two_alpha}};
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                json terms = json::array();
                for (const auto& p : f.terms) terms.push_back({{"a", p.a}, {"two_alpha", p.two_alpha}});
                return json{{"family", "sum"}, {"terms", terms}};
            } else {
                return json{{"family", "tabulated"}, {"t", f.t}, {"v", f.v},
                            {"alpha0", f.alpha0}, {"alpha_inf", f.alpha_inf}};
            }
        },
        family_);
}

VarianceSpec VarianceSpec::from_json(const nlohmann::json& j)
{
    try {
        const auto family = j.at("family").get<std::string>();
        if (family == "power")
            return power_law(j.at("a").get<double>(), j.at("two_alpha").get<double>());
        if (family == "sum") {
            std::vector<PowerTerm> terms;
            for (const auto& t : j.at("terms"))
                terms.push_back({t.at("a").get<double>(), t.at("two_alpha").get<double>()});
            return sum_of_powers(std::move(terms));
        }
        if (family == "tabulated")
            return tabulated(j.at("t").get<std::vector<double>>(), j.at("v").get<std::vector<double>>(),
                             j.at("alpha0").get<double>(), j.at("alpha_inf").get<double>());
        throw ConfigError("unknown variance family '" + family + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("variance spec: ") + e.what());
    }
}

double sigma2_eval(const VarianceSpec& spec, double t) { return spec.sigma2(t); }

double sigma_inverse(const VarianceSpec& spec, double y)
{
    if (!(y > 0.0)) throw DomainError(fmt::format("sigma_inverse: y must be > 0, got {}", y));
    if (const auto* p = std::get_if<PowerLaw>(&spec.family()))
        return std::pow(y * y / p->term.a, 1.0 / p->term.two_alpha);

    const double target = 2.0 * std::log(y);
    if (spec.bounded()) {
        const double tmax = spec.domain_max();
        if (y * y > spec.sigma2(tmax))
            throw RangeError(fmt::format("sigma_inverse: y = {} exceeds sigma(t_max) = {}", y,
                                         spec.sigma(tmax)));
        auto f = [&](double t) { return spec.sigma2(t) - y * y; };
        return numeric::find_root(f, {0.0, tmax}, 1e-13);
    }
    // log sigma^2 is increasing and close to linear in log t for these families
    auto f = [&](double s) { return std::log(spec.sigma2(std::exp(s))) - target; };
    numeric::Bracket b{-1.0, 1.0};
    while (f(b.lo) > 0) b.lo -= 4.0;
    while (f(b.hi) < 0) b.hi += 4.0;
    const double s = numeric::find_root(f, b, 1e-15);
    // polish in t so the relative error in t is ~1e-13
    const double t = std::exp(s);
    auto g = [&](double x) { return spec.sigma2(x) - y * y; };
    double lo = t * (1 - 1e-9), hi = t * (1 + 1e-9);
    if (g(lo) > 0 || g(hi) < 0) return t;
    return numeric::find_root(g, {lo, hi}, 1e-14);
}

PhiClass classify_phi(const VarianceSpec& spec)
{
    const double e = 2.0 * spec.alpha_inf();
    if (e < 1.0) return {PhiKind::Zero, 0.0};
    if (e > 1.0) return {PhiKind::Infinite, kInf};
    return std::visit(
        [&](const auto& f) -> PhiClass {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PowerLaw>) {
                return {PhiKind::Positive, f.term.a};
            } else if constexpr (std::is_same_v<F, SumOfPowers>) {
                double a = 0.0;
                for (const auto& p : f.terms)
                    if (p.two_alpha == 1.0) a += p.a;
                return {PhiKind::Positive, a};
            } else {
                // best available: secant slope through the last knot
                return {PhiKind::Positive, f.v.back() / f.t.back()};
            }
        },
        spec.family());
}

RiskModel::RiskModel(VarianceSpec v, double c, Horizon h)
    : variance(std::move(v)), drift_c(c), horizon(h)
{
    if (!(drift_c > 0.0) || !std::isfinite(drift_c))
        throw ConfigError(fmt::format("drift c must be positive, got {}", drift_c));
    if (horizon.is_finite()) {
        const double T = *horizon.T;
        if (!(T > 0.0) || !std::isfinite(T))
            throw ConfigError(fmt::format("finite horizon T must be positive, got {}", T));
        if (T > variance.domain_max())
            throw ConfigError(fmt::format("horizon T = {} outside variance domain [0, {}]", T,
                                          variance.domain_max()));
    } else {
        if (variance.bounded())
            throw ConfigError("infinite horizon needs a variance defined on [0, inf)");
        if (!(variance.alpha_inf() < 1.0))
            throw ConfigError("infinite horizon requires alpha_inf < 1");
    }
}

nlohmann::json RiskModel::to_json() const
{
    nlohmann::json j{{"variance", variance.to_json()}, {"drift_c", drift_c}};
    if (horizon.is_finite()) j["horizon"] = {{"finite", *horizon.T}};
    else j["horizon"] = "infinite";
    return j;
}

RiskModel RiskModel::from_json(const nlohmann::json& j)
{
    try {
        auto v = VarianceSpec::from_json(j.at("variance"));
        const double c = j.at("drift_c").get<double>();
        const auto& h = j.at("horizon");
        if (h.is_string()) {
            if (h.get<std::string>() != "infinite")
                throw ConfigError("horizon must be \"infinite\" or {\"finite\": T}");
            return RiskModel(std::move(v), c, Horizon::infinite());
        }
        return RiskModel(std::move(v), c, Horizon::finite(h.at("finite").get<double>()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
}

RiskModel RiskModel::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file '" + path + "': " + e.what());
    }
    return from_json(j);
}

} // namespace rrt
