#pragma once
//
// Closed-form asymptotic objects of the ruin and recovery-time limit laws:
// scaling functions, ruin-probability asymptotics and limit survival
// functions G(x).
//

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rrt/model.hpp"

namespace rrt {

// Standard normal survival P(N(0,1) > x).
double psi(double x);
// log Psi(x), accurate far beyond the underflow point of psi.
double log_psi(double x);

struct Minimizer {
    double t_u;  // argmin_t u(1+ct)/sigma(ut)
    double m;    // the minimum
};

class InfiniteHorizonConstants {
public:
    double t_star;
    double A;
    double B;

    double t_u(double u) const { return minimize(u).t_u; }
    double m(double u) const { return minimize(u).m; }
    Minimizer minimize(double u) const;
    double delta(double u) const;
    // sqrt(2 A pi / B) * u / (m Delta) * Psi(m)
    double theta(double u) const;
    double log_theta(double u) const;

    // (1 - sigma_u(t)) / ((B / 2A)(t - t_u)^2), sigma_u(t) = sigma(ut) m(u) / (u(1+ct))
    double expansion_ratio(double u, double t) const;

    const VarianceSpec& spec() const noexcept { return spec_; }
    double drift() const noexcept { return c_; }

private:
    friend InfiniteHorizonConstants infinite_constants(const RiskModel& model);
    InfiniteHorizonConstants(VarianceSpec spec, double c);

    VarianceSpec spec_;
    double c_;
};

InfiniteHorizonConstants infinite_constants(const RiskModel& model);

enum class FiniteCase { I, II, III };
std::string to_string(FiniteCase c);

class FiniteHorizonConstants {
public:
    double T;
    double c;
    double sigma_T;
    double sigma_dot_T;
    std::optional<double> a;  // sigma^2(t) ~ a t at 0 (case ii)
    std::optional<double> d;  // 2 sigma(T) sigma_dot(T) / a
    FiniteCase case_tag;

    double level(double u) const noexcept { return (u + c * T) / sigma_T; }
    double delta1(double u) const;
    double delta2(double u) const;
    // scaling function of the active case: Delta_1 for i and ii, Delta_2 for iii
    double delta(double u) const;
    double theta1(double u) const;

    const VarianceSpec& spec() const noexcept { return spec_; }

private:
    friend FiniteHorizonConstants finite_constants(const RiskModel& model);
    explicit FiniteHorizonConstants(VarianceSpec spec) : spec_(std::move(spec)) {}
    VarianceSpec spec_;
};

FiniteHorizonConstants finite_constants(const RiskModel& model);

// Asymptotic value together with the regime flag: formulas above 1 are
// returned unclamped and flagged.
struct Asymptotic {
    double value;
    bool pre_asymptotic;
};

Asymptotic ruin_prob_infinite(const RiskModel& model, double u, double h_estimate);

// Case i needs H(0); case ii uses 1 + 1/d unless piterbarg0 is given.
Asymptotic ruin_prob_finite(const RiskModel& model, double u, std::optional<double> h0 = {},
                            std::optional<double> piterbarg0 = {});

// Tabulated constant values over x, linearly interpolated inside the table.
struct ConstantTable {
    std::vector<std::pair<double, double>> points;  // (x, value), any order

    bool empty() const noexcept { return points.empty(); }
    std::optional<double> at(double x) const;
    void add(double x, double v) { points.emplace_back(x, v); }
};

struct LimitConstants {
    ConstantTable h_gamma;    // H(x): infinite horizon and case i
    ConstantTable piterbarg;  // P^d(x): case ii (x = 0 defaults to 1 + 1/d)
};

// Case-appropriate limit survival function G(x).
double limit_G(const RiskModel& model, double x, const LimitConstants& constants);

// Name of the active regime: "infinite", "i", "ii", "iii".
std::string regime_name(const RiskModel& model);

struct Prediction {
    double u;
    std::string regime;
    double delta;
    double theta;
    std::optional<double> ruin_prob;
    bool pre_asymptotic = false;
    std::vector<std::pair<double, std::optional<double>>> G;

    nlohmann::json to_json() const;
};

Prediction predict(const RiskModel& model, double u, std::span<const double> x_grid,
                   const LimitConstants& constants);

} // namespace rrt
