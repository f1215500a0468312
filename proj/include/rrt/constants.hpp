#pragma once
//
// Monte Carlo estimators for the generalised Pickands constants
//   H(x, S) = E exp(Gamma(x, S; sqrt(2) eta - Var eta)),   H(x) = lim H(x, S) / S,
// and the Piterbarg-type constant P^d(x) for Brownian motion with excess drift d.
//
// e^{sup} has a very heavy upper tail (infinite variance for plain Monte
// Carlo in most regimes of interest), so the default estimators use an
// unbiased change of measure: a uniform (H) or geometric (P^d) mixture over
// the grid of exponential tilts, under which each replica contributes a
// bounded term. The plain estimator remains available.
//
// Every estimate carries a two-level refinement check: the same paths are
// evaluated on the grid (step delta) and on its every-other-point subgrid
// (2 delta), and the reported value is the Richardson extrapolation of the
// two with the process' local Hoelder index as the error order.
//

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrt/gaussgen.hpp"
#include "rrt/model.hpp"

namespace rrt {

struct EtaSpec {
    enum class Kind { FbmIndexed, ScaledProcess };

    Kind kind = Kind::FbmIndexed;
    double hurst = 0.5;                // FbmIndexed
    std::optional<VarianceSpec> base;  // ScaledProcess: the model's sigma^2
    double phi = 1.0;                  // ScaledProcess: Var eta(t) = sigma^2(phi t) / sigma^2(phi)

    static EtaSpec fbm(double hurst);
    static EtaSpec scaled(VarianceSpec spec, double phi);

    double variance(double t) const;
    // local Hoelder index at 0; the discretisation-error order of sup functionals
    double local_index() const;
    // Var eta(t) = t exactly
    bool brownian() const;
    // variance function of eta as a spec (single power term when one exists)
    VarianceSpec variance_spec() const;
    PathGenerator generator(const GridSpec& grid, GeneratorChoice choice = GeneratorChoice::Auto) const;

    std::string describe() const;
    nlohmann::json to_json() const;
};

EtaSpec select_eta(const RiskModel& model);

enum class ConstantKind { HGammaFinite, HGammaRate, Piterbarg };
std::string to_string(ConstantKind k);

struct EstimatorOptions {
    bool importance = true;
    bool richardson = true;
    std::uint64_t seed = 1;
    std::uint64_t experiment = 0;  // 0: derive from the estimator label
    unsigned threads = 0;
    GeneratorChoice generator = GeneratorChoice::Auto;
    double max_reject_fraction = 1e-3;
};

struct ConstantEstimate {
    ConstantKind kind;
    double value = 0.0;
    double se = 0.0;
    // per-level estimates behind the extrapolation
    double fine_value = 0.0, fine_se = 0.0;      // step delta
    double coarse_value = 0.0, coarse_se = 0.0;  // step 2 delta
    double richardson_order = 0.0;
    bool richardson = false;
    // configuration
    double x = 0.0;
    double x_snapped = 0.0;
    double S = 0.0;
    double delta = 0.0;
    std::size_t replicas = 0;
    std::size_t rejected = 0;
    std::uint64_t seed = 0;
    std::uint64_t experiment = 0;
    std::string method;
    std::string process;
    nlohmann::json diagnostics = nlohmann::json::object();

    nlohmann::json to_json() const;
};

ConstantEstimate estimate_h_gamma(const EtaSpec& eta, double x, double S, double delta,
                                  std::size_t replicas, const EstimatorOptions& opt = {});

// H(x, S) for several x from the same paths (common random numbers).
// diff_se[k] is the paired standard error of estimates[k] - estimates[k+1].
struct HGammaCurve {
    std::vector<ConstantEstimate> estimates;
    std::vector<double> diff_se;
};

HGammaCurve estimate_h_gamma_curve(const EtaSpec& eta, std::span<const double> xs, double S,
                                   double delta, std::size_t replicas, const EstimatorOptions& opt = {});

struct RateEstimate {
    ConstantEstimate rate;  // slope of H(x, S) against S
    double intercept = 0.0;
    double intercept_se = 0.0;
    double endpoint_ratio = 0.0;  // H(x, S_max) / S_max
    double endpoint_se = 0.0;
    bool agreement = false;      // slope and endpoint ratio within 3 joint SE
    bool inconsistent = false;   // fitted slope <= 0
    std::vector<ConstantEstimate> per_S;

    nlohmann::json to_json() const;
};

RateEstimate estimate_h_gamma_rate(const EtaSpec& eta, double x, std::span<const double> S_list,
                                   double delta, std::size_t replicas, const EstimatorOptions& opt = {});

ConstantEstimate estimate_piterbarg(double d, double x, double S, double delta, std::size_t replicas,
                                    const EstimatorOptions& opt = {});

} // namespace rrt
