#pragma once
//
// Experiment orchestration: configuration, the four experiment kinds, result
// records and report emission (CSV, JSON, SVG).
//

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrt/asymptotics.hpp"
#include "rrt/constants.hpp"
#include "rrt/model.hpp"
#include "rrt/passage.hpp"

namespace rrt {

enum class ExperimentKind { RecoveryLaw, RuinProb, ConstantRate, RefinementSweep };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ConstantRateConfig {
    std::optional<EtaSpec> eta;  // default: selected from the model
    std::vector<double> x_list{0.0};
    std::vector<double> S_list{4.0, 8.0, 16.0};
    double delta = 0.002;
};

struct ExperimentConfig {
    std::string model_path;             // informational when the model is inline
    std::optional<RiskModel> model;
    ExperimentKind kind = ExperimentKind::RecoveryLaw;
    std::vector<double> u_list;
    std::vector<double> x_grid;
    std::size_t replicas = 1000;
    double rho = 20.0;
    std::optional<double> step;         // explicit grid step, overrides rho
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    unsigned threads = 0;
    ConditioningMethod conditioning = ConditioningMethod::Auto;
    GeneratorChoice generator = GeneratorChoice::Auto;
    double window_safety = 1.5;
    double window_tail_eps = 1e-3;
    LimitConstants constants;
    ConstantRateConfig constant;

    void validate() const;
    // Everything that determines the numbers; excludes out_dir and threads.
    nlohmann::json canonical() const;
    std::string hash() const;

    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path);
};

// Grid used for level u: [0, T] or the infinite-horizon window, step = Delta(u) / rho.
GridSpec experiment_grid(const ExperimentConfig& cfg, double u, double* t_end = nullptr);

struct SurvivalRow {
    double x;
    double empirical;
    double ci_lo;
    double ci_hi;
    std::optional<double> predicted;
};

struct LevelRecord {
    double u;
    double delta;           // scaling function Delta_case(u)
    double grid_step;
    std::size_t grid_points;
    std::string method;
    std::string generator;
    std::size_t replicas;
    std::size_t accepted;
    double acceptance_rate;
    double ess;
    double ruin_prob;
    double ruin_prob_se;
    std::optional<double> predicted_ruin_prob;
    std::optional<double> exact_ruin_prob;
    bool pre_asymptotic = false;
    bool no_ruin = false;
    double acceptance_upper_bound = 0.0;
    std::vector<SurvivalRow> survival;
    std::optional<double> sup_distance;
    // refinement sweep: survival at the halved step and the comparison
    std::vector<SurvivalRow> refined;
    std::optional<bool> refinement_within;
};

struct ConstantPoint {
    double S;
    double value;
    double se;
};

struct ConstantRow {
    double x;
    double rate;
    double rate_se;
    double endpoint_ratio;
    bool agreement;
    bool inconsistent;
    std::vector<ConstantPoint> per_S;
    nlohmann::json detail;  // full estimator record
};

struct ResultRecord {
    std::string config_hash;
    nlohmann::json config;
    ExperimentKind kind;
    std::string regime;
    std::vector<double> x_grid;
    std::vector<LevelRecord> levels;
    std::vector<ConstantRow> constants;
    bool degenerate = false;          // no ruin at any u
    std::optional<bool> sup_distance_decreasing;
    std::optional<bool> rate_nonincreasing;
    double wall_seconds = 0.0;        // written to the timing sidecar only

    nlohmann::json to_json() const;
    static ResultRecord from_json(const nlohmann::json& j);
};

ResultRecord run_recovery_law(const ExperimentConfig& cfg);
ResultRecord run_ruin_prob(const ExperimentConfig& cfg);
ResultRecord run_constant_rate(const ExperimentConfig& cfg);
ResultRecord run_refinement_sweep(const ExperimentConfig& cfg);
ResultRecord run_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { Csv, Json, Svg };
std::vector<ReportFormat> parse_formats(const std::string& list);

// Writes into out_dir: survival.csv (+ ruin_prob.csv / constant_rate.csv),
// record.json, survival.svg (+ ruin_ratio.svg), and timing.json. Returns
// the written paths.
std::vector<std::string> emit_report(const ResultRecord& record, const std::vector<ReportFormat>& formats,
                                     const std::string& out_dir);

// Individual renderers, exposed for tests.
std::string survival_csv(const ResultRecord& record);
std::string ruin_prob_csv(const ResultRecord& record);
std::string constant_rate_csv(const ResultRecord& record);
std::string survival_svg(const ResultRecord& record);
std::string ruin_ratio_svg(const ResultRecord& record);

// "a:b:h" ranges or comma lists.
std::vector<double> parse_number_list(const std::string& s);

} // namespace rrt
