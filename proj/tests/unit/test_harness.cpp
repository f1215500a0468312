#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include <gtest/gtest.h>

#include "rrt/errors.hpp"
#include "rrt/harness.hpp"

using namespace rrt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json bm_finite_model() { return {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.0}}}, {"drift_c", 1.0}, {"horizon", {{"finite", 1.0}}}}; }

json small_config()
{
    return {{"model", bm_finite_model()},
            {"kind", "recovery-law"},
            {"u_list", {1.0, 1.5, 2.0}},
            {"x_grid", "0:2:0.5"},
            {"replicas", 400},
            {"rho", 10},
            {"seed", 3}};
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / fmt::format("rrt_harness_{}_{}", name, ::getpid());
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = fmt::format("\"{}\" {} >/dev/null 2>&1", RRT_CLI_PATH, args);
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(NumberList, RangesAndLists)
{
    EXPECT_EQ(parse_number_list("0:1:0.25"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
    EXPECT_EQ(parse_number_list("1,2.5,4"), (std::vector<double>{1, 2.5, 4}));
    EXPECT_EQ(parse_number_list("0:5:0.1").size(), 51u);
    EXPECT_EQ(parse_number_list("0:5:0.1")[17], 1.7);
    EXPECT_EQ(parse_number_list("0:5:0.1")[30], 3.0);
    EXPECT_TRUE(parse_number_list("").empty());
    EXPECT_THROW(parse_number_list("1:0:0.5"), ConfigError);
    EXPECT_THROW(parse_number_list("a,b"), ConfigError);
}

TEST(Config, ParsesAndValidates)
{
    const auto c = ExperimentConfig::from_json(small_config());
    EXPECT_EQ(c.kind, ExperimentKind::RecoveryLaw);
    EXPECT_EQ(c.u_list.size(), 3u);
    EXPECT_EQ(c.x_grid.size(), 5u);
    EXPECT_EQ(c.replicas, 400u);
    ASSERT_TRUE(c.model.has_value());
    EXPECT_TRUE(c.model->horizon.is_finite());
}

TEST(Config, Errors)
{
    auto j = small_config();
    j["u_list"] = {2.0, 1.0};
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = small_config();
    j["replicas"] = 10;
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = small_config();
    j.erase("model");
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = small_config();
    j["kind"] = "nonsense";
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = small_config();
    j["model"] = "does/not/exist.json";
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
}

TEST(Config, HashIgnoresOutputAndThreads)
{
    auto j = small_config();
    const auto h0 = ExperimentConfig::from_json(j).hash();
    j["out"] = "elsewhere";
    j["threads"] = 7;
    EXPECT_EQ(ExperimentConfig::from_json(j).hash(), h0);
    j["seed"] = 4;
    EXPECT_NE(ExperimentConfig::from_json(j).hash(), h0);
}

TEST(Config, ModelPathRelativeToConfig)
{
    const auto dir = scratch("relmodel");
    std::ofstream(dir / "m.json") << bm_finite_model().dump();
    auto j = small_config();
    j["model"] = "m.json";
    std::ofstream(dir / "cfg.json") << j.dump();
    const auto c = ExperimentConfig::load((dir / "cfg.json").string());
    ASSERT_TRUE(c.model.has_value());
    EXPECT_DOUBLE_EQ(c.model->drift_c, 1.0);
    fs::remove_all(dir);
}

TEST(Grid, FiniteHorizonStep)
{
    const auto c = ExperimentConfig::from_json(small_config());
    const auto g = experiment_grid(c, 2.0);
    EXPECT_EQ(g.origin, 0.0);
    EXPECT_NEAR(g.span(), 1.0, 1e-12);
    EXPECT_GT(g.n_points, 2u);
}

TEST(Reports, CsvShapes)
{
    auto c = ExperimentConfig::from_json(small_config());
    const auto r = run_recovery_law(c);
    ASSERT_EQ(r.levels.size(), 3u);
    const auto csv = survival_csv(r);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "u,x,empirical_survival,ci_lo,ci_hi,predicted_G");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 15u);
    // survival at x = 0 is one by definition of the tie rule
    for (const auto& L : r.levels) {
        ASSERT_FALSE(L.survival.empty());
        EXPECT_DOUBLE_EQ(L.survival.front().empirical, 1.0);
        EXPECT_GT(L.accepted, 0u);
        for (std::size_t k = 1; k < L.survival.size(); ++k)
            EXPECT_LE(L.survival[k].empirical, L.survival[k - 1].empirical);
    }

    c.x_grid.clear();
    const auto empty = run_recovery_law(c);
    EXPECT_EQ(survival_csv(empty), "u,x,empirical_survival,ci_lo,ci_hi,predicted_G\n");
}

TEST(Reports, SvgWellFormedAndRecordRoundTrip)
{
    const auto r = run_recovery_law(ExperimentConfig::from_json(small_config()));
    for (const auto& svg : {survival_svg(r), ruin_ratio_svg(r)}) {
        std::istringstream in(svg);
        boost::property_tree::ptree tree;
        EXPECT_NO_THROW(boost::property_tree::read_xml(in, tree));
        EXPECT_TRUE(tree.get_child_optional("svg").has_value());
    }
    const auto j = r.to_json();
    const auto back = ResultRecord::from_json(j);
    EXPECT_EQ(back.to_json().dump(), j.dump());
    EXPECT_EQ(survival_csv(back), survival_csv(r));
    EXPECT_EQ(ruin_prob_csv(back), ruin_prob_csv(r));
}

TEST(Reports, EmitWritesFiles)
{
    const auto dir = scratch("emit");
    const auto r = run_recovery_law(ExperimentConfig::from_json(small_config()));
    const auto paths = emit_report(r, parse_formats("csv,json,svg"), dir.string());
    for (const char* f : {"survival.csv", "ruin_prob.csv", "record.json", "survival.svg", "ruin_ratio.svg", "timing.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_FALSE(paths.empty());
    EXPECT_THROW(parse_formats("csv,pdf"), ConfigError);
    fs::remove_all(dir);
}

TEST(Determinism, SerialEqualsParallel)
{
    auto j = small_config();
    j["threads"] = 1;
    const auto a = run_experiment(ExperimentConfig::from_json(j));
    j["threads"] = 3;
    const auto b = run_experiment(ExperimentConfig::from_json(j));
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    EXPECT_EQ(survival_csv(a), survival_csv(b));
}

TEST(ConstantRate, SmallRun)
{
    json j{{"model", {{"variance", {{"family", "power"}, {"a", 1.0}, {"two_alpha", 1.0}}}, {"drift_c", 1.0}, {"horizon", "infinite"}}},
           {"kind", "constant-rate"},
           {"replicas", 500},
           {"constant", {{"x_list", {0.0, 0.5}}, {"S_list", {1.0, 2.0, 4.0}}, {"delta", 0.02}}}};
    const auto r = run_experiment(ExperimentConfig::from_json(j));
    ASSERT_EQ(r.constants.size(), 2u);
    EXPECT_EQ(r.constants[0].per_S.size(), 3u);
    EXPECT_GT(r.constants[0].rate, 0.0);
    const auto csv = constant_rate_csv(r);
    EXPECT_NE(csv.find('\n'), std::string::npos);
}

TEST(Cli, ExitCodes)
{
    const auto dir = scratch("cli");
    std::ofstream(dir / "m.json") << bm_finite_model().dump();
    auto cfg = small_config();
    cfg["model"] = "m.json";
    cfg["replicas"] = 200;
    cfg["out"] = (dir / "out").string();
    std::ofstream(dir / "ok.json") << cfg.dump();
    EXPECT_EQ(run_cli(fmt::format("experiment --config {}", (dir / "ok.json").string())), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "record.json"));
    // the config's own x_grid, replicas and rho survive when no override flag is given
    const auto rec = json::parse(slurp(dir / "out" / "record.json"));
    EXPECT_EQ(rec["x_grid"].size(), 5u);
    EXPECT_EQ(rec["config"]["replicas"], 200);
    EXPECT_DOUBLE_EQ(rec["config"]["rho"].get<double>(), 10.0);

    EXPECT_EQ(run_cli(fmt::format("report --record {} --out {}", (dir / "out" / "record.json").string(),
                                  (dir / "rerender").string())),
              0);
    EXPECT_EQ(slurp(dir / "out" / "survival.csv"), slurp(dir / "rerender" / "survival.csv"));

    auto bad = cfg;
    bad["u_list"] = {3.0, 1.0};
    std::ofstream(dir / "bad.json") << bad.dump();
    EXPECT_EQ(run_cli(fmt::format("experiment --config {}", (dir / "bad.json").string())), 2);
    EXPECT_EQ(run_cli("no-such-subcommand"), 2);
    EXPECT_EQ(run_cli(fmt::format("predict --model {} --u 1,2", (dir / "missing.json").string())), 2);

    auto degenerate = cfg;
    degenerate["u_list"] = {40.0};
    degenerate["conditioning"] = "rejection";
    degenerate["replicas"] = 100;
    std::ofstream(dir / "deg.json") << degenerate.dump();
    EXPECT_EQ(run_cli(fmt::format("experiment --config {}", (dir / "deg.json").string())), 3);

    EXPECT_EQ(run_cli(fmt::format("predict --model {} --u 1,2 --out {}", (dir / "m.json").string(),
                                  (dir / "pred").string())),
              0);
    const auto pred = json::parse(slurp(dir / "pred" / "predictions.json"));
    ASSERT_EQ(pred.size(), 2u);
    EXPECT_TRUE(pred[0].contains("G"));
    fs::remove_all(dir);
}
