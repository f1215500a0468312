#pragma once
//
// First/last passage of X(t) - ct over level u on a grid, and conditional
// sampling of the recovery time R = last - first given ruin.
//

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrt/gaussgen.hpp"
#include "rrt/model.hpp"
#include "rrt/stats.hpp"

namespace rrt {

struct PassageResult {
    bool ruined = false;
    std::optional<double> first;
    std::optional<double> last;
    std::optional<double> recovery;
    std::optional<std::size_t> first_index;
    std::optional<std::size_t> last_index;
};

// Exceedance is strict: X(t) - c t > u.
PassageResult extract_passage(std::span<const double> values, const GridSpec& grid, double u, double c);
PassageResult extract_passage(const PathSample& path, double u, double c);

// Simulation window [0, t_end] for the infinite horizon. t_end is the larger of
//   u t_u + safety * u ln m(u) / m(u)
// and the time after u t_u where the single-point exceedance exponent
// l(t)^2 = ((u + ct)/sigma(t))^2 exceeds m(u)^2 by 2 ln(1/tail_eps).
struct InfiniteWindow {
    double t_end;
    double centre;       // u t_u
    double half_width;   // u ln m(u) / m(u)
    double m;
};

InfiniteWindow infinite_window(const RiskModel& model, double u, double safety = 1.5,
                               double tail_eps = 1e-3);

enum class ConditioningMethod { Auto, Rejection, Mixture };
std::string to_string(ConditioningMethod m);
ConditioningMethod conditioning_from_string(const std::string& s);

struct RecoveryOptions {
    ConditioningMethod method = ConditioningMethod::Auto;
    GeneratorChoice generator = GeneratorChoice::Auto;
    std::uint64_t seed = 1;
    std::uint64_t experiment = 0;
    unsigned threads = 0;
    // Auto switches to the mixture sampler when the largest single-point
    // exceedance probability on the grid falls below this value.
    double auto_threshold = 1e-3;
};

// The mixture sampler picks a grid point j with probability proportional to
// Psi(m_j), m_j = (u + c t_j)/sigma(t_j), draws X(t_j) above u + c t_j and
// fills in the path by Gaussian conditioning. Each path is ruined; its weight
// relative to the exact conditional law is 1 / #(exceeding grid points).
struct RecoverySamples {
    std::vector<stats::WeightedSample> samples;  // (R, weight) for ruined paths
    std::size_t replicas = 0;
    std::size_t accepted = 0;
    double acceptance_rate = 0.0;
    double ruin_prob = 0.0;
    double ruin_prob_se = 0.0;
    double ess = 0.0;
    ConditioningMethod method = ConditioningMethod::Rejection;
    std::string generator;
    bool no_ruin = false;
    // rule-of-three 95% upper bound on the ruin probability when no_ruin
    double acceptance_upper_bound = 0.0;
};

RecoverySamples conditional_recovery_sample(const RiskModel& model, double u, const GridSpec& grid,
                                            std::size_t replicas, const RecoveryOptions& options = {});

} // namespace rrt
