// rrt: command-line front end for simulation, constant estimation,
// predictions and experiments.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 degenerate experiment (no ruin observed at any level).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rrt/asymptotics.hpp"
#include "rrt/constants.hpp"
#include "rrt/errors.hpp"
#include "rrt/gaussgen.hpp"
#include "rrt/harness.hpp"
#include "rrt/passage.hpp"
#include "rrt/rng.hpp"
#include "rrt/stats.hpp"

namespace {

using namespace rrt;
using nlohmann::json;

constexpr int kConfigError = 2;
constexpr int kDegenerate = 3;

void write_or_print(const std::string& out, const std::string& content, const std::string& name)
{
    if (out.empty() || out == "-") {
        std::cout << content;
        return;
    }
    std::filesystem::create_directories(out);
    const auto path = std::filesystem::path(out) / name;
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << content;
    std::cerr << "wrote " << path.string() << '\n';
}

LimitConstants load_constants(const std::string& path)
{
    LimitConstants c;
    if (path.empty()) return c;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open constants file '" + path + "'");
    json j;
    try {
        in >> j;
        for (const auto& [key, table] : {std::pair{"h_gamma", &c.h_gamma}, std::pair{"piterbarg", &c.piterbarg}})
            if (j.contains(key))
                for (const auto& row : j[key]) table->add(row.at(0).get<double>(), row.at(1).get<double>());
    } catch (const json::exception& e) {
        throw ConfigError("malformed constants file: " + std::string(e.what()));
    }
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Recovery-time simulation and asymptotics toolkit"};
    app.require_subcommand(1);

    // shared option storage; subcommand defaults are applied at parse time,
    // so overrides below are keyed on count() rather than on the value
    std::string model_path, out, x_grid_s, u_s, format = "csv,json,svg", constants_path;
    std::size_t replicas = 0;
    std::uint64_t seed = 1;
    double rho = 0.0;
    unsigned threads = 0;

    // simulate
    auto* sim = app.add_subcommand("simulate", "conditional recovery-time samples at given levels");
    std::size_t dump_paths = 0;
    std::string method = "auto";
    sim->add_option("--model", model_path, "model JSON file")->required();
    sim->add_option("--u", u_s, "levels, comma list or a:b:h")->required();
    sim->add_option("--replicas", replicas, "paths per level")->default_val(1000);
    sim->add_option("--seed", seed, "root seed");
    sim->add_option("--rho", rho, "grid points per unit of the scaling function")->default_val(20.0);
    sim->add_option("--method", method, "auto | rejection | mixture");
    sim->add_option("--dump-paths", dump_paths, "also dump this many unconditional paths per level");
    sim->add_option("--out", out, "output directory (default: stdout)");
    sim->add_option("--threads", threads, "worker threads (0: all cores)");

    // estimate-constant
    auto* est = app.add_subcommand("estimate-constant", "Monte Carlo estimate of H(x,S), its rate, or P^d(x)");
    std::string kind = "h_gamma", S_s = "8";
    double x = 0.0, delta = 0.002, d = 1.0, hurst = 0.5;
    bool naive = false, no_richardson = false;
    est->add_option("--kind", kind, "h_gamma | h_gamma_rate | piterbarg")
        ->check(CLI::IsMember({"h_gamma", "h_gamma_rate", "piterbarg"}));
    est->add_option("--model", model_path, "model file; eta is selected from it (else --hurst)");
    est->add_option("--hurst", hurst, "eta = fBm with this Hurst index");
    est->add_option("--x", x, "offset");
    est->add_option("--S", S_s, "span (list for h_gamma_rate)");
    est->add_option("--delta", delta, "grid step");
    est->add_option("--d", d, "excess drift for piterbarg");
    est->add_option("--replicas", replicas, "replicas")->default_val(10000);
    est->add_option("--seed", seed, "root seed");
    est->add_flag("--naive", naive, "plain Monte Carlo instead of the tilted mixture");
    est->add_flag("--no-richardson", no_richardson, "report the fine-grid value only");
    est->add_option("--out", out, "output directory (default: stdout)");
    est->add_option("--threads", threads, "worker threads (0: all cores)");

    // predict
    auto* pre = app.add_subcommand("predict", "asymptotic predictions as JSON rows");
    pre->add_option("--model", model_path, "model JSON file")->required();
    pre->add_option("--u", u_s, "levels")->required();
    pre->add_option("--x-grid", x_grid_s, "x values for G")->default_val("0:3:0.5");
    pre->add_option("--constants", constants_path, "JSON {\"h_gamma\": [[x,v],..], \"piterbarg\": [[x,v],..]}");
    pre->add_option("--out", out, "output directory (default: stdout)");

    // experiment
    auto* exp = app.add_subcommand("experiment", "run an experiment config and write reports");
    std::string config_path;
    exp->add_option("--config", config_path, "experiment JSON file")->required();
    exp->add_option("--model", model_path, "override the model file");
    exp->add_option("--u", u_s, "override u_list");
    exp->add_option("--x-grid", x_grid_s, "override x_grid");
    exp->add_option("--replicas", replicas, "override replicas");
    exp->add_option("--seed", seed, "override seed");
    exp->add_option("--rho", rho, "override rho");
    exp->add_option("--out", out, "override output directory");
    exp->add_option("--format", format, "csv,json,svg");
    exp->add_option("--threads", threads, "worker threads (0: all cores)");

    // report
    auto* rep = app.add_subcommand("report", "re-render reports from a saved record.json");
    std::string record_path;
    rep->add_option("--record", record_path, "record.json")->required();
    rep->add_option("--out", out, "output directory")->required();
    rep->add_option("--format", format, "csv,json,svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (*sim) {
            const auto model = RiskModel::load(model_path);
            ExperimentConfig cfg;
            cfg.model = model;
            cfg.rho = rho;
            json rows = json::array();
            for (double u : parse_number_list(u_s)) {
                const auto grid = experiment_grid(cfg, u);
                RecoveryOptions opt;
                opt.method = conditioning_from_string(method);
                opt.seed = seed;
                opt.experiment = fnv1a(fmt::format("simulate|u={}", u));
                opt.threads = threads;
                const auto rs = conditional_recovery_sample(model, u, grid, replicas, opt);
                json samples = json::array();
                for (const auto& s : rs.samples) samples.push_back({s.value, s.weight});
                rows.push_back({{"u", u},
                                {"grid", {{"step", grid.step}, {"n_points", grid.n_points}}},
                                {"method", to_string(rs.method)},
                                {"generator", rs.generator},
                                {"replicas", rs.replicas},
                                {"accepted", rs.accepted},
                                {"acceptance_rate", rs.acceptance_rate},
                                {"ruin_prob", rs.ruin_prob},
                                {"ruin_prob_se", rs.ruin_prob_se},
                                {"no_ruin", rs.no_ruin},
                                {"acceptance_upper_bound", rs.acceptance_upper_bound},
                                {"samples", samples}});
                if (dump_paths > 0 && !out.empty()) {
                    const auto gen = PathGenerator::for_spec(model.variance, grid);
                    std::vector<PathSample> paths;
                    for (std::size_t i = 0; i < dump_paths; ++i) {
                        RngStream rng(seed, fnv1a(fmt::format("dump|u={}", u)), i);
                        paths.push_back(gen.sample(rng));
                    }
                    std::filesystem::create_directories(out);
                    write_path_dump((std::filesystem::path(out) / fmt::format("paths_u{}", u)).string(), paths);
                }
            }
            write_or_print(out, rows.dump(2) + "\n", "samples.json");
            return 0;
        }
        if (*est) {
            EtaSpec eta = EtaSpec::fbm(hurst);
            if (!model_path.empty()) {
                const auto model = RiskModel::load(model_path);
                eta = model.horizon.is_finite() ? EtaSpec::fbm(model.variance.alpha0()) : select_eta(model);
            }
            EstimatorOptions opt;
            opt.importance = !naive;
            opt.richardson = !no_richardson;
            opt.seed = seed;
            opt.threads = threads;
            const auto Ss = parse_number_list(S_s);
            if (Ss.empty()) throw ConfigError("--S needs at least one value");
            json j;
            if (kind == "h_gamma") j = estimate_h_gamma(eta, x, Ss.front(), delta, replicas, opt).to_json();
            else if (kind == "h_gamma_rate") j = estimate_h_gamma_rate(eta, x, Ss, delta, replicas, opt).to_json();
            else j = estimate_piterbarg(d, x, Ss.front(), delta, replicas, opt).to_json();
            write_or_print(out, j.dump(2) + "\n", "estimate.json");
            return 0;
        }
        if (*pre) {
            const auto model = RiskModel::load(model_path);
            const auto constants = load_constants(constants_path);
            const auto xs = parse_number_list(x_grid_s);
            json rows = json::array();
            for (double u : parse_number_list(u_s)) rows.push_back(predict(model, u, xs, constants).to_json());
            write_or_print(out, rows.dump(2) + "\n", "predictions.json");
            return 0;
        }
        if (*exp) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open experiment config '" + config_path + "'");
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw ConfigError("cannot parse '" + config_path + "': " + e.what());
            }
            if (exp->count("--model")) j["model"] = std::filesystem::absolute(model_path).string();
            if (exp->count("--u")) j["u_list"] = parse_number_list(u_s);
            if (exp->count("--x-grid")) j["x_grid"] = parse_number_list(x_grid_s);
            if (exp->count("--replicas")) j["replicas"] = replicas;
            if (exp->count("--seed")) j["seed"] = seed;
            if (exp->count("--rho")) j["rho"] = rho;
            if (exp->count("--out")) j["out"] = out;
            if (exp->count("--threads")) j["threads"] = threads;
            const auto cfg =
                ExperimentConfig::from_json(j, std::filesystem::path(config_path).parent_path().string());
            const auto record = run_experiment(cfg);
            for (const auto& p : emit_report(record, parse_formats(format), cfg.out_dir)) std::cerr << "wrote " << p << '\n';
            if (record.degenerate) {
                std::cerr << "degenerate experiment: no ruin observed at any level\n";
                return kDegenerate;
            }
            return 0;
        }
        if (*rep) {
            std::ifstream in(record_path);
            if (!in) throw ConfigError("cannot open record '" + record_path + "'");
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw ConfigError("cannot parse '" + record_path + "': " + e.what());
            }
            const auto record = ResultRecord::from_json(j);
            for (const auto& p : emit_report(record, parse_formats(format), out)) std::cerr << "wrote " << p << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
