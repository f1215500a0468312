#include "rrt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rrt/errors.hpp"
#include "rrt/rng.hpp"
#include "rrt/stats.hpp"

namespace rrt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::RecoveryLaw: return "recovery-law";
    case ExperimentKind::RuinProb: return "ruin-prob";
    case ExperimentKind::ConstantRate: return "constant-rate";
    case ExperimentKind::RefinementSweep: return "refinement-sweep";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s)
{
    if (s == "recovery-law") return ExperimentKind::RecoveryLaw;
    if (s == "ruin-prob") return ExperimentKind::RuinProb;
    if (s == "constant-rate") return ExperimentKind::ConstantRate;
    if (s == "refinement-sweep") return ExperimentKind::RefinementSweep;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

std::vector<double> parse_number_list(const std::string& s)
{
    std::vector<double> out;
    if (s.empty()) return out;
    auto num = [&](const std::string& t) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + t + "'");
        }
    };
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("range must look like start:stop:step, got '" + s + "'");
        const double a = num(parts[0]), b = num(parts[1]), h = num(parts[2]);
        if (!(h > 0.0) || b < a) throw ConfigError("invalid range '" + s + "'");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
        // round to 12 significant digits so 0:5:0.1 yields 1.7 rather than 1.7000000000000002
        for (std::size_t k = 0; k <= n; ++k)
            out.push_back(std::stod(fmt::format("{:.12g}", a + static_cast<double>(k) * h)));
        return out;
    }
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');)
        if (!p.empty()) out.push_back(num(p));
    return out;
}

// ---------------------------------------------------------------- config

namespace {

ConstantTable table_from_json(const json& j)
{
    ConstantTable t;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 2) throw ConfigError("constant tables hold [x, value] pairs");
        t.add(row[0].get<double>(), row[1].get<double>());
    }
    return t;
}

json table_to_json(const ConstantTable& t)
{
    auto pts = t.points;
    std::sort(pts.begin(), pts.end());
    json j = json::array();
    for (const auto& [x, v] : pts) j.push_back({x, v});
    return j;
}

std::vector<double> number_list(const json& j, const char* what)
{
    if (j.is_string()) return parse_number_list(j.get<std::string>());
    if (!j.is_array()) throw ConfigError(fmt::format("'{}' must be an array or a range string", what));
    return j.get<std::vector<double>>();
}

GeneratorChoice generator_from_string(const std::string& s)
{
    if (s == "auto") return GeneratorChoice::Auto;
    if (s == "circulant") return GeneratorChoice::Circulant;
    if (s == "cholesky") return GeneratorChoice::Cholesky;
    throw ConfigError("unknown generator '" + s + "'");
}

std::string generator_to_string(GeneratorChoice g)
{
    switch (g) {
    case GeneratorChoice::Auto: return "auto";
    case GeneratorChoice::Circulant: return "circulant";
    case GeneratorChoice::Cholesky: return "cholesky";
    }
    return "?";
}

std::optional<double> opt_num(const json& j, const char* key)
{
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

void ExperimentConfig::validate() const
{
    if (!model) throw ConfigError("experiment config has no model");
    if (kind != ExperimentKind::ConstantRate) {
        if (u_list.empty()) throw ConfigError("u_list must not be empty");
        for (std::size_t k = 1; k < u_list.size(); ++k)
            if (!(u_list[k] > u_list[k - 1])) throw ConfigError("u_list must be strictly increasing");
    }
    if (replicas < 100) throw ConfigError(fmt::format("replicas must be >= 100, got {}", replicas));
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (step && !(*step > 0.0)) throw ConfigError("step must be positive");
    for (double x : x_grid)
        if (!(x >= 0.0)) throw ConfigError("x_grid values must be >= 0");
    if (kind == ExperimentKind::ConstantRate && constant.S_list.size() < 3)
        throw ConfigError("constant-rate needs at least 3 values of S");
}

json ExperimentConfig::canonical() const
{
    json c{{"model", model ? model->to_json() : json(nullptr)},
           {"kind", to_string(kind)},
           {"u_list", u_list},
           {"x_grid", x_grid},
           {"replicas", replicas},
           {"rho", rho},
           {"step", opt_json(step)},
           {"seed", seed},
           {"conditioning", to_string(conditioning)},
           {"generator", generator_to_string(generator)},
           {"window", {{"safety", window_safety}, {"tail_eps", window_tail_eps}}},
           {"constants", {{"h_gamma", table_to_json(constants.h_gamma)},
                          {"piterbarg", table_to_json(constants.piterbarg)}}}};
    if (kind == ExperimentKind::ConstantRate)
        c["constant"] = {{"eta", constant.eta ? constant.eta->to_json() : json(nullptr)},
                         {"x_list", constant.x_list},
                         {"S_list", constant.S_list},
                         {"delta", constant.delta}};
    return c;
}

std::string ExperimentConfig::hash() const { return fmt::format("{:016x}", fnv1a(canonical().dump())); }

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir)
{
    ExperimentConfig c;
    try {
        if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
        if (!j.contains("model")) throw ConfigError("experiment config needs a 'model'");
        if (j["model"].is_string()) {
            fs::path p = j["model"].get<std::string>();
            if (p.is_relative()) p = fs::path(base_dir) / p;
            c.model_path = p.string();
            c.model = RiskModel::load(c.model_path);
        } else {
            c.model = RiskModel::from_json(j["model"]);
        }
        if (j.contains("kind")) c.kind = experiment_kind_from_string(j["kind"].get<std::string>());
        if (j.contains("u_list")) c.u_list = number_list(j["u_list"], "u_list");
        if (j.contains("x_grid")) c.x_grid = number_list(j["x_grid"], "x_grid");
        if (j.contains("replicas")) c.replicas = j["replicas"].get<std::size_t>();
        if (j.contains("rho")) c.rho = j["rho"].get<double>();
        c.step = opt_num(j, "step");
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
        if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
        if (j.contains("conditioning")) c.conditioning = conditioning_from_string(j["conditioning"].get<std::string>());
        if (j.contains("generator")) c.generator = generator_from_string(j["generator"].get<std::string>());
        if (j.contains("window")) {
            const auto& w = j["window"];
            if (w.contains("safety")) c.window_safety = w["safety"].get<double>();
            if (w.contains("tail_eps")) c.window_tail_eps = w["tail_eps"].get<double>();
        }
        if (j.contains("constants")) {
            const auto& k = j["constants"];
            if (k.contains("h_gamma")) c.constants.h_gamma = table_from_json(k["h_gamma"]);
            if (k.contains("piterbarg")) c.constants.piterbarg = table_from_json(k["piterbarg"]);
        }
        if (j.contains("constant")) {
            const auto& k = j["constant"];
            if (k.contains("x_list")) c.constant.x_list = number_list(k["x_list"], "x_list");
            if (k.contains("S_list")) c.constant.S_list = number_list(k["S_list"], "S_list");
            if (k.contains("delta")) c.constant.delta = k["delta"].get<double>();
            if (k.contains("eta") && !k["eta"].is_null()) {
                const auto& e = k["eta"];
                const auto kind = e.at("kind").get<std::string>();
                if (kind == "fbm") c.constant.eta = EtaSpec::fbm(e.at("hurst").get<double>());
                else if (kind == "scaled")
                    c.constant.eta = EtaSpec::scaled(c.model->variance, e.value("phi", 1.0));
                else throw ConfigError("eta kind must be 'fbm' or 'scaled'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open experiment config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
    return from_json(j, fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------- runs

namespace {

double scaling(const RiskModel& model, double u)
{
    if (model.horizon.is_finite()) return finite_constants(model).delta(u);
    return infinite_constants(model).delta(u);
}

std::optional<double> exact_ruin(const RiskModel& model, double u)
{
    // sigma^2(t) = a t: P(sup sqrt(a) B(t) - ct > u) = exp(-2cu / a)
    if (model.horizon.is_finite() || !model.variance.is_brownian()) return std::nullopt;
    const double a = model.variance.as_single_power()->a;
    return std::exp(-2.0 * model.drift_c * u / a);
}

std::vector<SurvivalRow> survival_rows(const RecoverySamples& rs, const std::vector<double>& xs, double delta,
                                       const Prediction& pred)
{
    std::vector<SurvivalRow> rows;
    const auto curve = stats::weighted_survival(rs.samples, xs, delta);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        SurvivalRow r{xs[k], curve[k].survival, curve[k].ci.lo, curve[k].ci.hi, pred.G[k].second};
        if (rs.accepted == 0) r = {xs[k], 0.0, 0.0, 1.0, pred.G[k].second};
        rows.push_back(r);
    }
    return rows;
}

LevelRecord run_level(const ExperimentConfig& cfg, double u, double rho_factor, const std::string& tag)
{
    const auto& model = *cfg.model;
    LevelRecord L{};
    L.u = u;
    L.delta = scaling(model, u);
    ExperimentConfig c2 = cfg;
    if (c2.step) *c2.step /= rho_factor;
    c2.rho *= rho_factor;
    const GridSpec grid = experiment_grid(c2, u);
    L.grid_step = grid.step;
    L.grid_points = grid.n_points;

    RecoveryOptions opt;
    opt.method = cfg.conditioning;
    opt.generator = cfg.generator;
    opt.seed = cfg.seed;
    opt.experiment = fnv1a(fmt::format("{}|{}|u={}", to_string(cfg.kind), tag, u));
    opt.threads = cfg.threads;
    const auto rs = conditional_recovery_sample(model, u, grid, cfg.replicas, opt);

    L.method = to_string(rs.method);
    L.generator = rs.generator;
    L.replicas = rs.replicas;
    L.accepted = rs.accepted;
    L.acceptance_rate = rs.acceptance_rate;
    L.ess = rs.ess;
    L.ruin_prob = rs.ruin_prob;
    L.ruin_prob_se = rs.ruin_prob_se;
    L.no_ruin = rs.no_ruin;
    L.acceptance_upper_bound = rs.acceptance_upper_bound;
    L.exact_ruin_prob = exact_ruin(model, u);

    const auto pred = predict(model, u, cfg.x_grid, cfg.constants);
    L.predicted_ruin_prob = pred.ruin_prob;
    L.pre_asymptotic = pred.pre_asymptotic;
    L.survival = survival_rows(rs, cfg.x_grid, L.delta, pred);
    if (!rs.no_ruin) {
        std::optional<double> d;
        for (const auto& r : L.survival)
            if (r.predicted) d = std::max(d.value_or(0.0), std::abs(r.empirical - *r.predicted));
        L.sup_distance = d;
    }
    return L;
}

ResultRecord make_record(const ExperimentConfig& cfg)
{
    cfg.validate();
    ResultRecord r;
    r.config_hash = cfg.hash();
    r.config = cfg.canonical();
    r.kind = cfg.kind;
    r.regime = regime_name(*cfg.model);
    r.x_grid = cfg.x_grid;
    return r;
}

void finish_levels(ResultRecord& r)
{
    r.degenerate = !r.levels.empty() &&
                   std::all_of(r.levels.begin(), r.levels.end(), [](const LevelRecord& l) { return l.no_ruin; });
    bool have = true, dec = true;
    for (std::size_t k = 0; k < r.levels.size(); ++k) {
        if (!r.levels[k].sup_distance) {
            have = false;
            break;
        }
        if (k > 0 && !(*r.levels[k].sup_distance < *r.levels[k - 1].sup_distance)) dec = false;
    }
    if (have && !r.levels.empty()) r.sup_distance_decreasing = dec;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

GridSpec experiment_grid(const ExperimentConfig& cfg, double u, double* t_end)
{
    const auto& model = *cfg.model;
    const double target = cfg.step ? *cfg.step : scaling(model, u) / cfg.rho;
    double length;
    if (model.horizon.is_finite()) {
        length = *model.horizon.T;
    } else {
        length = infinite_window(model, u, cfg.window_safety, cfg.window_tail_eps).t_end;
    }
    if (t_end) *t_end = length;
    if (!(target > 0.0) || !std::isfinite(target)) throw DomainError("experiment_grid: invalid step");
    const double n = std::ceil(length / target - 1e-9);
    if (n > 5e8) throw ConfigError(fmt::format("grid with {} points at u = {} is too large", n, u));
    if (model.horizon.is_finite()) return GridSpec{length / n, static_cast<std::size_t>(n) + 1};
    return GridSpec{target, static_cast<std::size_t>(n) + 1};
}

ResultRecord run_recovery_law(const ExperimentConfig& cfg)
{
    const auto t0 = Clock::now();
    auto r = make_record(cfg);
    for (double u : cfg.u_list) r.levels.push_back(run_level(cfg, u, 1.0, "base"));
    finish_levels(r);
    r.wall_seconds = seconds_since(t0);
    return r;
}

ResultRecord run_ruin_prob(const ExperimentConfig& cfg) { return run_recovery_law(cfg); }

ResultRecord run_refinement_sweep(const ExperimentConfig& cfg)
{
    const auto t0 = Clock::now();
    auto r = make_record(cfg);
    for (double u : cfg.u_list) {
        auto L = run_level(cfg, u, 1.0, "base");
        const auto F = run_level(cfg, u, 2.0, "refined");
        L.refined = F.survival;
        bool within = true;
        for (std::size_t k = 0; k < L.survival.size(); ++k) {
            const double width = L.survival[k].ci_hi - L.survival[k].ci_lo;
            if (std::abs(L.survival[k].empirical - F.survival[k].empirical) >= width) within = false;
        }
        L.refinement_within = within;
        r.levels.push_back(std::move(L));
    }
    finish_levels(r);
    r.wall_seconds = seconds_since(t0);
    return r;
}

ResultRecord run_constant_rate(const ExperimentConfig& cfg)
{
    const auto t0 = Clock::now();
    auto r = make_record(cfg);
    const auto& model = *cfg.model;
    EtaSpec eta = EtaSpec::fbm(0.5);
    if (cfg.constant.eta) {
        eta = *cfg.constant.eta;
    } else if (!model.horizon.is_finite()) {
        eta = select_eta(model);
    } else if (finite_constants(model).case_tag == FiniteCase::I) {
        eta = EtaSpec::fbm(model.variance.alpha0());
    } else {
        throw ConfigError("constant-rate: this finite-horizon case has no H constant; give constant.eta");
    }
    for (double x : cfg.constant.x_list) {
        EstimatorOptions opt;
        opt.seed = cfg.seed;
        opt.threads = cfg.threads;
        opt.generator = cfg.generator;
        opt.experiment = fnv1a(fmt::format("constant-rate|x={}", x));
        const auto est = estimate_h_gamma_rate(eta, x, cfg.constant.S_list, cfg.constant.delta, cfg.replicas, opt);
        ConstantRow row{x, est.rate.value, est.rate.se, est.endpoint_ratio, est.agreement, est.inconsistent, {}, est.to_json()};
        for (const auto& e : est.per_S) row.per_S.push_back({e.S, e.value, e.se});
        r.constants.push_back(std::move(row));
    }
    bool mono = true;
    for (std::size_t k = 1; k < r.constants.size(); ++k) {
        const auto& a = r.constants[k - 1];
        const auto& b = r.constants[k];
        if (b.x >= a.x && b.rate > a.rate + 3.0 * std::hypot(a.rate_se, b.rate_se)) mono = false;
    }
    if (r.constants.size() > 1) r.rate_nonincreasing = mono;
    r.wall_seconds = seconds_since(t0);
    return r;
}

ResultRecord run_experiment(const ExperimentConfig& cfg)
{
    switch (cfg.kind) {
    case ExperimentKind::RecoveryLaw: return run_recovery_law(cfg);
    case ExperimentKind::RuinProb: return run_ruin_prob(cfg);
    case ExperimentKind::ConstantRate: return run_constant_rate(cfg);
    case ExperimentKind::RefinementSweep: return run_refinement_sweep(cfg);
    }
    throw ConfigError("unknown experiment kind");
}

// ---------------------------------------------------------------- record JSON

namespace {

json rows_to_json(const std::vector<SurvivalRow>& rows)
{
    json a = json::array();
    for (const auto& s : rows)
        a.push_back({{"x", s.x},
                     {"empirical_survival", s.empirical},
                     {"ci_lo", s.ci_lo},
                     {"ci_hi", s.ci_hi},
                     {"predicted_G", opt_json(s.predicted)}});
    return a;
}

std::vector<SurvivalRow> rows_from_json(const json& a)
{
    std::vector<SurvivalRow> rows;
    for (const auto& s : a)
        rows.push_back({s.at("x").get<double>(), s.at("empirical_survival").get<double>(),
                        s.at("ci_lo").get<double>(), s.at("ci_hi").get<double>(), opt_num(s, "predicted_G")});
    return rows;
}

} // namespace

json ResultRecord::to_json() const
{
    json lv = json::array();
    for (const auto& L : levels) {
        json j{{"u", L.u},
               {"Delta", L.delta},
               {"grid", {{"step", L.grid_step}, {"n_points", L.grid_points}}},
               {"method", L.method},
               {"generator", L.generator},
               {"replicas", L.replicas},
               {"accepted", L.accepted},
               {"acceptance_rate", L.acceptance_rate},
               {"ess", L.ess},
               {"ruin_prob", L.ruin_prob},
               {"ruin_prob_se", L.ruin_prob_se},
               {"predicted_ruin_prob", opt_json(L.predicted_ruin_prob)},
               {"exact_ruin_prob", opt_json(L.exact_ruin_prob)},
               {"pre_asymptotic", L.pre_asymptotic},
               {"no_ruin", L.no_ruin},
               {"acceptance_upper_bound", L.acceptance_upper_bound},
               {"survival", rows_to_json(L.survival)},
               {"sup_distance", opt_json(L.sup_distance)}};
        if (L.predicted_ruin_prob && *L.predicted_ruin_prob > 0.0) {
            j["ratio"] = L.ruin_prob / *L.predicted_ruin_prob;
            j["ratio_se"] = L.ruin_prob_se / *L.predicted_ruin_prob;
        }
        if (L.no_ruin) j["diagnostic"] = fmt::format("no ruin events observed in {} replicas; ruin probability "
                                                     "below {:.3g} at 95%", L.replicas, L.acceptance_upper_bound);
        if (L.refinement_within) {
            j["refined_survival"] = rows_to_json(L.refined);
            j["refinement_within_ci"] = *L.refinement_within;
        }
        lv.push_back(std::move(j));
    }
    json cs = json::array();
    for (const auto& c : constants) {
        json per = json::array();
        for (const auto& p : c.per_S) per.push_back({{"S", p.S}, {"H", p.value}, {"se", p.se}});
        cs.push_back({{"x", c.x},
                      {"rate", c.rate},
                      {"rate_se", c.rate_se},
                      {"endpoint_ratio", c.endpoint_ratio},
                      {"agreement", c.agreement},
                      {"inconsistent", c.inconsistent},
                      {"per_S", per},
                      {"detail", c.detail}});
    }
    json j{{"config_hash", config_hash},
           {"config", config},
           {"kind", to_string(kind)},
           {"case", regime},
           {"x_grid", x_grid},
           {"levels", lv},
           {"constants", cs},
           {"degenerate", degenerate}};
    j["sup_distance_decreasing"] = sup_distance_decreasing ? json(*sup_distance_decreasing) : json(nullptr);
    j["rate_nonincreasing"] = rate_nonincreasing ? json(*rate_nonincreasing) : json(nullptr);
    return j;
}

ResultRecord ResultRecord::from_json(const json& j)
{
    ResultRecord r;
    try {
        r.config_hash = j.at("config_hash").get<std::string>();
        r.config = j.at("config");
        r.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
        r.regime = j.at("case").get<std::string>();
        r.x_grid = j.at("x_grid").get<std::vector<double>>();
        for (const auto& l : j.at("levels")) {
            LevelRecord L{};
            L.u = l.at("u").get<double>();
            L.delta = l.at("Delta").get<double>();
            L.grid_step = l.at("grid").at("step").get<double>();
            L.grid_points = l.at("grid").at("n_points").get<std::size_t>();
            L.method = l.at("method").get<std::string>();
            L.generator = l.at("generator").get<std::string>();
            L.replicas = l.at("replicas").get<std::size_t>();
            L.accepted = l.at("accepted").get<std::size_t>();
            L.acceptance_rate = l.at("acceptance_rate").get<double>();
            L.ess = l.at("ess").get<double>();
            L.ruin_prob = l.at("ruin_prob").get<double>();
            L.ruin_prob_se = l.at("ruin_prob_se").get<double>();
            L.predicted_ruin_prob = opt_num(l, "predicted_ruin_prob");
            L.exact_ruin_prob = opt_num(l, "exact_ruin_prob");
            L.pre_asymptotic = l.at("pre_asymptotic").get<bool>();
            L.no_ruin = l.at("no_ruin").get<bool>();
            L.acceptance_upper_bound = l.at("acceptance_upper_bound").get<double>();
            L.survival = rows_from_json(l.at("survival"));
            L.sup_distance = opt_num(l, "sup_distance");
            if (l.contains("refined_survival")) {
                L.refined = rows_from_json(l["refined_survival"]);
                L.refinement_within = l.at("refinement_within_ci").get<bool>();
            }
            r.levels.push_back(std::move(L));
        }
        for (const auto& c : j.at("constants")) {
            ConstantRow row{c.at("x").get<double>(), c.at("rate").get<double>(), c.at("rate_se").get<double>(),
                            c.at("endpoint_ratio").get<double>(), c.at("agreement").get<bool>(),
                            c.at("inconsistent").get<bool>(), {}, c.value("detail", json::object())};
            for (const auto& p : c.at("per_S"))
                row.per_S.push_back({p.at("S").get<double>(), p.at("H").get<double>(), p.at("se").get<double>()});
            r.constants.push_back(std::move(row));
        }
        r.degenerate = j.at("degenerate").get<bool>();
        if (!j.at("sup_distance_decreasing").is_null())
            r.sup_distance_decreasing = j["sup_distance_decreasing"].get<bool>();
        if (!j.at("rate_nonincreasing").is_null()) r.rate_nonincreasing = j["rate_nonincreasing"].get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed result record: ") + e.what());
    }
    return r;
}

} // namespace rrt
