#pragma once
//
// Risk model declarations: the variance function sigma^2(t) of the claim
// process X, the premium rate c and the time horizon.
//

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace rrt {

struct PowerTerm {
    double a;          // prefactor, > 0
    double two_alpha;  // exponent of t, in (0, 2]
};

// sigma^2(t) = a t^{2 alpha}
struct PowerLaw {
    PowerTerm term;
};

// sigma^2(t) = sum_i a_i t^{2 alpha_i}
struct SumOfPowers {
    std::vector<PowerTerm> terms;
};

// Monotone piecewise-cubic (Fritsch-Carlson) interpolant through (t_i, v_i).
// The first knot must be (0, 0). Indices cannot be estimated from samples and
// are supplied by the user.
struct TabulatedMonotone {
    std::vector<double> t;
    std::vector<double> v;
    double alpha0;
    double alpha_inf;
};

class VarianceSpec {
public:
    using Family = std::variant<PowerLaw, SumOfPowers, TabulatedMonotone>;

    static VarianceSpec power_law(double a, double two_alpha);
    static VarianceSpec sum_of_powers(std::vector<PowerTerm> terms);
    static VarianceSpec tabulated(std::vector<double> t, std::vector<double> v,
                                  double alpha0, double alpha_inf);

    const Family& family() const noexcept { return family_; }
    double alpha0() const noexcept { return alpha0_; }
    double alpha_inf() const noexcept { return alpha_inf_; }

    // Upper end of the domain (infinity for parametric families).
    double domain_max() const noexcept;
    bool bounded() const noexcept;

    double sigma2(double t) const;
    double sigma(double t) const;
    // d sigma^2 / dt; central difference with relative step 1e-6 for tabulated
    double dsigma2(double t) const;
    // d sigma / dt = (d sigma^2/dt) / (2 sigma)
    double sigma_dot(double t) const;

    // Single power term, i.e. a scaled fractional Brownian motion.
    std::optional<PowerTerm> as_single_power() const;
    // sigma^2 linear in t: increments are independent.
    bool is_brownian() const;

    // Coefficient a of sigma^2(t) ~ a t as t -> 0 (requires alpha0 == 1/2).
    std::optional<double> linear_coefficient_at_zero() const;

    std::string describe() const;
    nlohmann::json to_json() const;
    static VarianceSpec from_json(const nlohmann::json& j);

private:
    explicit VarianceSpec(Family f);

    Family family_;
    double alpha0_ = 0.0;
    double alpha_inf_ = 0.0;
    std::vector<double> slopes_;  // tabulated: interpolant derivatives at knots
};

double sigma2_eval(const VarianceSpec& spec, double t);

// Inverse of t -> sigma(t): exact for PowerLaw, bracketed root solve to
// relative tolerance 1e-12 otherwise.
double sigma_inverse(const VarianceSpec& spec, double y);

enum class PhiKind { Zero, Positive, Infinite };

// phi = lim_{u -> inf} sigma^2(u) / u
struct PhiClass {
    PhiKind kind;
    double phi;  // 0, the limit, or +inf
};

PhiClass classify_phi(const VarianceSpec& spec);

struct Horizon {
    std::optional<double> T;  // nullopt: infinite horizon

    static Horizon infinite() { return {}; }
    static Horizon finite(double T) { return {T}; }
    bool is_finite() const noexcept { return T.has_value(); }
};

struct RiskModel {
    VarianceSpec variance;
    double drift_c;
    Horizon horizon;

    RiskModel(VarianceSpec v, double c, Horizon h);

    nlohmann::json to_json() const;
    static RiskModel from_json(const nlohmann::json& j);
    static RiskModel load(const std::string& path);
};

} // namespace rrt
