// Acceptance suite. `acceptance N` runs criterion N (no argument: all) and
// prints one PASS/FAIL line per criterion; the exit status is nonzero if any
// requested criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rrt/asymptotics.hpp"
#include "rrt/constants.hpp"
#include "rrt/functionals.hpp"
#include "rrt/gaussgen.hpp"
#include "rrt/harness.hpp"
#include "rrt/passage.hpp"
#include "rrt/rng.hpp"
#include "rrt/stats.hpp"
#include "support/oracles.hpp"

using namespace rrt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, std::string note)
    {
        if (!ok) pass = false;
        notes.push_back((ok ? "" : "!! ") + std::move(note));
    }
};

RiskModel power(double a, double two_alpha, double c, std::optional<double> T = {})
{
    return RiskModel(VarianceSpec::power_law(a, two_alpha), c, T ? Horizon::finite(*T) : Horizon::infinite());
}

// 1. P^d(0) = 1 + 1/d
Verdict piterbarg_closed_form()
{
    Verdict v;
    for (double d : {0.5, 1.0, 2.0}) {
        const double S = std::max(30.0, 30.0 / d) / (1.0 + d);
        EstimatorOptions opt;
        opt.seed = 20240101;
        const auto e = estimate_piterbarg(d, 0.0, S, 0.002, 200000, opt);
        const double exact = 1.0 + 1.0 / d;
        const double tol = std::max(3.0 * e.se, 0.03 * exact);
        v.check(std::abs(e.value - exact) <= tol,
                fmt::format("d={} S={} P={:.5f} se={:.2e} (fine {:.5f}, coarse {:.5f}) exact={:.5f} tol={:.4f}", d, S,
                            e.value, e.se, e.fine_value, e.coarse_value, exact, tol));
    }
    return v;
}

// 2. Brownian rate and collapse
Verdict brownian_rate()
{
    Verdict v;
    EstimatorOptions opt;
    opt.seed = 7;
    const double S[] = {4.0, 8.0, 16.0};
    const auto r = estimate_h_gamma_rate(EtaSpec::fbm(0.5), 0.0, S, 0.002, 100000, opt);
    v.check(r.rate.value >= 0.9 && r.rate.value <= 1.1,
            fmt::format("slope={:.4f} se={:.4f} endpoint ratio={:.4f}", r.rate.value, r.rate.se, r.endpoint_ratio));
    const auto k = infinite_constants(power(1, 1, 1));
    const double ratio = std::exp(k.log_theta(40.0) + 80.0);
    v.check(ratio >= 0.99 && ratio <= 1.01, fmt::format("Theta(40)/exp(-80) = {:.6f}", ratio));
    return v;
}

// 3. Brownian ruin frequency against exp(-2u)
Verdict brownian_ruin()
{
    Verdict v;
    const auto model = power(1, 1, 1);
    for (double u : {1.5, 2.0, 2.5}) {
        const auto w = infinite_window(model, u);
        const auto grid = GridSpec::covering(w.t_end, 2.5e-4);
        RecoveryOptions opt;
        opt.method = ConditioningMethod::Rejection;
        opt.seed = 99;
        opt.experiment = fnv1a(fmt::format("acceptance-3|u={}", u));
        const auto rs = conditional_recovery_sample(model, u, grid, 100000, opt);
        const double exact = std::exp(-2.0 * u);
        const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(rs.replicas));
        v.check(std::abs(rs.ruin_prob - exact) <= 4.0 * se,
                fmt::format("u={} window={:.2f} freq={:.5f} exact={:.5f} z={:.2f}", u, w.t_end, rs.ruin_prob, exact,
                            (rs.ruin_prob - exact) / se));
    }
    return v;
}

// 4. case iii recovery law
Verdict case_iii_law()
{
    Verdict v;
    json j{{"model", {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.4}}},
                      {"drift_c", 1.0},
                      {"horizon", {{"finite", 1.0}}}}},
           {"kind", "recovery-law"},
           {"u_list", {4.0, 6.0, 8.0}},
           {"x_grid", "0:5:0.1"},
           {"replicas", 50000},
           {"rho", 20},
           {"seed", 4},
           {"conditioning", "mixture"}};
    const auto rec = run_experiment(ExperimentConfig::from_json(j));
    double prev = 1e9;
    bool decreasing = true;
    for (const auto& L : rec.levels) {
        const double d = L.sup_distance.value_or(1.0);
        decreasing = decreasing && d < prev;
        prev = d;
        v.check(L.accepted >= 500, fmt::format("u={} accepted={} ess={:.0f} sup distance={:.4f} p={:.3e}", L.u,
                                               L.accepted, L.ess, d, L.ruin_prob));
    }
    v.check(decreasing, "sup distance strictly decreasing along u_list");
    v.check(prev <= 0.08, fmt::format("final sup distance {:.4f} <= 0.08", prev));
    return v;
}

// 5. functional and passage oracles
Verdict functional_oracles()
{
    Verdict v;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z;
    std::size_t bad_g = 0, bad_gp = 0, bad_p = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n_half = 1 + gen() % 64;
        std::vector<double> f(2 * n_half + 1);
        for (auto& x : f) x = (gen() % 4 == 0) ? std::round(z(gen)) : z(gen);
        const std::size_t lag = gen() % (n_half + 1);
        if (gamma_kernel(f, n_half, lag) != oracle::gamma_brute(f, n_half, lag)) ++bad_g;
        const std::span<const double> head(f.data(), n_half + 1);
        if (gamma_prime_kernel(head, lag) != oracle::gamma_prime_brute(head, lag)) ++bad_gp;

        const std::size_t n = 2 + gen() % 127;
        const double step = 0.01 + 0.1 * std::uniform_real_distribution<double>()(gen);
        std::vector<double> path(n, 0.0);
        for (std::size_t k = 1; k < n; ++k) path[k] = path[k - 1] + z(gen) * std::sqrt(step);
        const double u = 0.5 * z(gen), c = std::abs(z(gen));
        const GridSpec grid{step, n};
        const auto got = extract_passage(path, grid, u, c);
        const auto ref = oracle::passage_brute(path, step, u, c);
        const bool same = got.ruined == ref.first.has_value() &&
                          (!got.ruined || (got.first_index == *ref.first && got.last_index == *ref.last));
        if (!same) ++bad_p;
    }
    v.check(bad_g == 0, fmt::format("gamma mismatches: {}/1000", bad_g));
    v.check(bad_gp == 0, fmt::format("gamma_prime mismatches: {}/1000", bad_gp));
    v.check(bad_p == 0, fmt::format("passage mismatches: {}/1000", bad_p));
    return v;
}

// 6. generator correctness
Verdict generators()
{
    Verdict v;
    const std::size_t reps = 10000;
    for (double H : {0.3, 0.5, 0.8}) {
        const GridSpec grid{1.0, 1025};
        const auto gen = PathGenerator::for_fbm(H, grid);
        std::vector<stats::Moments> lag(11);
        std::vector<double> x(grid.n_points);
        for (std::size_t r = 0; r < reps; ++r) {
            RngStream rng(2026, fnv1a(fmt::format("acceptance-6|H={}", H)), r);
            gen.generate(rng, x);
            const std::size_t n = grid.n_increments();
            for (std::size_t k = 0; k <= 10; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i + k < n; ++i) s += (x[i + 1] - x[i]) * (x[i + k + 1] - x[i + k]);
                lag[k].add(s / static_cast<double>(n - k));
            }
        }
        double worst = 0.0;
        for (std::size_t k = 0; k <= 10; ++k)
            worst = std::max(worst, std::abs(lag[k].mean() - fgn_autocovariance(H, k, 1.0)) / lag[k].se());
        v.check(worst <= 4.0, fmt::format("H={} [{}] max |z| over lags 0..10 = {:.2f}", H, gen.id(), worst));
    }

    // circulant against Cholesky at H = 0.7, n = 128
    const GridSpec grid{1.0 / 128, 129};
    const auto circ = PathGenerator::for_fbm(0.7, grid, 1.0, GeneratorChoice::Circulant);
    const auto chol = PathGenerator::for_fbm(0.7, grid, 1.0, GeneratorChoice::Cholesky);
    const std::size_t m = 20000;
    auto summarise = [&](const PathGenerator& g, std::uint64_t exp) {
        std::vector<stats::Moments> s(6);
        std::vector<double> x(grid.n_points);
        for (std::size_t r = 0; r < m; ++r) {
            RngStream rng(6, exp, r);
            g.generate(rng, x);
            s[0].add(x[16] * x[16]);
            s[1].add(x[64] * x[64]);
            s[2].add(x[128] * x[128]);
            s[3].add(x[64] * x[128]);
            s[4].add(*std::max_element(x.begin(), x.end()));
            s[5].add(x[128] > 0.5 ? 1.0 : 0.0);
        }
        return s;
    };
    const auto a = summarise(circ, fnv1a("acceptance-6|circulant"));
    const auto b = summarise(chol, fnv1a("acceptance-6|cholesky"));
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        worst = std::max(worst, std::abs(a[k].mean() - b[k].mean()) / std::hypot(a[k].se(), b[k].se()));
    v.check(worst <= 4.0, fmt::format("{} vs {}: max |z| over 6 statistics = {:.2f}", circ.id(), chol.id(), worst));
    return v;
}

// 7. local quadratic expansion of 1 - sigma_u around t_u
Verdict expansion()
{
    Verdict v;
    for (double al : {0.3, 0.5, 0.8}) {
        const auto k = infinite_constants(power(1, 2 * al, 1));
        const double u = 1e3;
        const double tu = k.t_u(u);
        double worst = 0.0;
        for (int i = -10; i <= 10; ++i) {
            if (i == 0) continue;
            worst = std::max(worst, std::abs(k.expansion_ratio(u, tu + 1e-3 * i) - 1.0));
        }
        v.check(worst <= 0.05, fmt::format("alpha={} t_u={:.6f} max |ratio-1| = {:.2e}", al, tu, worst));
    }
    return v;
}

// 8. monotonicity and normalisation
Verdict monotonicity()
{
    Verdict v;
    const RiskModel models[] = {power(1, 1, 1), power(1, 0.6, 1), power(2, 1.5, 0.5), power(1, 0.8, 1, 1.0),
                                power(1, 1, 1, 1.0), power(1, 1.4, 1, 1.0)};
    bool g0 = true;
    for (const auto& m : models) g0 = g0 && limit_G(m, 0.0, {}) == 1.0;
    v.check(g0, "G(0) = 1 for six models covering every case");

    const double xs[] = {0.0, 0.25, 0.5, 1.0, 2.0};
    for (double H : {0.35, 0.5, 0.7}) {
        EstimatorOptions opt;
        opt.seed = 8;
        const auto c = estimate_h_gamma_curve(EtaSpec::fbm(H), xs, 4.0, 0.01, 10000, opt);
        bool mono = true, pos = true;
        for (std::size_t k = 0; k < c.estimates.size(); ++k) {
            pos = pos && c.estimates[k].value > 0.0;
            if (k + 1 < c.estimates.size())
                mono = mono && c.estimates[k + 1].value <= c.estimates[k].value + 3.0 * c.diff_se[k];
        }
        v.check(mono && pos, fmt::format("H(x,4) for fbm(H={}) positive and nonincreasing: {:.3f} .. {:.3f}", H,
                                         c.estimates.front().value, c.estimates.back().value));
    }
    bool ppos = true;
    for (double x : {0.0, 1.0, 3.0}) {
        EstimatorOptions opt;
        ppos = ppos && estimate_piterbarg(1.0, x, 10.0, 0.01, 5000, opt).value > 0.0;
    }
    v.check(ppos, "P^1(x) positive for x in {0, 1, 3}");

    const json model_list[] = {
        {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.4}}}, {"drift_c", 1.0}, {"horizon", {{"finite", 1.0}}}},
        {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.0}}}, {"drift_c", 1.0}, {"horizon", {{"finite", 1.0}}}},
        {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.0}}}, {"drift_c", 1.0}, {"horizon", "infinite"}},
    };
    for (const auto& mj : model_list) {
        json j{{"model", mj}, {"kind", "recovery-law"}, {"u_list", {1.0, 2.0}}, {"x_grid", "0:4:0.25"},
               {"replicas", 2000}, {"rho", 10}, {"seed", 8}};
        const auto rec = run_experiment(ExperimentConfig::from_json(j));
        bool ok = true;
        for (const auto& L : rec.levels)
            for (std::size_t k = 0; k < L.survival.size(); ++k) {
                const auto& s = L.survival[k];
                ok = ok && s.empirical >= 0.0 && s.empirical <= 1.0 && s.ci_lo >= 0.0 && s.ci_hi <= 1.0;
                if (k > 0) ok = ok && s.empirical <= L.survival[k - 1].empirical;
            }
        v.check(ok, fmt::format("survival curves nonincreasing in [0,1] ({})", rec.regime));
    }
    return v;
}

// 9. byte-identical reports, serial vs parallel
Verdict determinism()
{
    Verdict v;
    const auto root = fs::temp_directory_path() / "rrt_acceptance_9";
    fs::remove_all(root);
    auto render = [&](json j, unsigned threads, const std::string& tag) {
        j["threads"] = threads;
        const auto rec = run_experiment(ExperimentConfig::from_json(j));
        const auto dir = root / tag;
        emit_report(rec, parse_formats("csv,json,svg"), dir.string());
        return dir;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const json configs[] = {
        {{"model", {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.4}}}, {"drift_c", 1.0}, {"horizon", {{"finite", 1.0}}}}},
         {"kind", "recovery-law"}, {"u_list", {2.0, 3.0}}, {"x_grid", "0:3:0.5"}, {"replicas", 2000}, {"seed", 9}},
        {{"model", {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.0}}}, {"drift_c", 1.0}, {"horizon", "infinite"}}},
         {"kind", "constant-rate"}, {"replicas", 2000}, {"constant", {{"x_list", {0.0, 0.5}}, {"S_list", {1.0, 2.0, 4.0}}, {"delta", 0.01}}}},
    };
    int idx = 0;
    for (const auto& cfg : configs) {
        const auto a = render(cfg, 1, fmt::format("c{}_serial_a", idx));
        const auto b = render(cfg, 1, fmt::format("c{}_serial_b", idx));
        const auto c = render(cfg, 4, fmt::format("c{}_parallel", idx));
        for (const auto& entry : fs::directory_iterator(a)) {
            const auto name = entry.path().filename();
            if (name == "timing.json") continue;
            const auto ref = slurp(a / name);
            v.check(ref == slurp(b / name) && ref == slurp(c / name),
                    fmt::format("{} {} identical across repeat and 4 threads ({} bytes)", cfg["kind"].get<std::string>(),
                                name.string(), ref.size()));
        }
        ++idx;
    }
    fs::remove_all(root);
    return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>> kCriteria = {
    {"Piterbarg closed form", piterbarg_closed_form},
    {"Brownian Pickands rate and collapse", brownian_rate},
    {"exact Brownian ruin frequency", brownian_ruin},
    {"case iii recovery law", case_iii_law},
    {"functional oracle equivalence", functional_oracles},
    {"generator correctness", generators},
    {"local expansion around t_u", expansion},
    {"monotonicity and normalisation", monotonicity},
    {"determinism", determinism},
};

} // namespace

int main(int argc, char** argv)
{
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) which.push_back(i);

    bool all = true;
    for (int i : which) {
        if (i < 1 || i > static_cast<int>(kCriteria.size())) {
            std::cerr << "unknown criterion " << i << '\n';
            return 2;
        }
        const auto& [name, fn] = kCriteria[static_cast<std::size_t>(i - 1)];
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (const auto& n : v.notes) std::cout << "    " << n << '\n';
        std::cout << fmt::format("criterion {}: {} ({}, {:.1f} s)", i, v.pass ? "PASS" : "FAIL", name, secs)
                  << std::endl;
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
