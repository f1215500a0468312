#include <cmath>

#include <gtest/gtest.h>

#include "rrt/constants.hpp"
#include "rrt/errors.hpp"

using namespace rrt;

TEST(SelectEta, PhiCases)
{
    const auto bm = select_eta(RiskModel(VarianceSpec::power_law(1, 1), 1, Horizon::infinite()));
    EXPECT_EQ(bm.kind, EtaSpec::Kind::ScaledProcess);
    EXPECT_DOUBLE_EQ(bm.phi, 1.0);
    EXPECT_TRUE(bm.brownian());
    EXPECT_DOUBLE_EQ(bm.variance(2.5), 2.5);
    const auto z = select_eta(RiskModel(VarianceSpec::power_law(1, 0.8), 1, Horizon::infinite()));
    EXPECT_EQ(z.kind, EtaSpec::Kind::FbmIndexed);
    EXPECT_DOUBLE_EQ(z.hurst, 0.4);
    const auto i = select_eta(RiskModel(VarianceSpec::power_law(1, 1.6), 1, Horizon::infinite()));
    EXPECT_DOUBLE_EQ(i.hurst, 0.8);
}

TEST(EtaSpec, ScaledSumOfPowersVariance)
{
    const auto spec = VarianceSpec::sum_of_powers({{2, 1}, {1, 0.5}});
    const auto eta = EtaSpec::scaled(spec, 2.0);
    EXPECT_EQ(eta.variance(0.0), 0.0);
    for (double t : {0.1, 1.0, 3.0}) {
        EXPECT_NEAR(eta.variance(t), spec.sigma2(2 * t) / spec.sigma2(2), 1e-14);
        EXPECT_NEAR(eta.variance_spec().sigma2(t), eta.variance(t), 1e-14);
    }
}

TEST(HGamma, ZeroOffsetIsExpSup)
{
    // with S = delta the grid has 3 points; x = 0 gives max over t in {0, delta}
    EstimatorOptions o;
    o.importance = false;
    o.richardson = false;
    o.seed = 4;
    const auto e = estimate_h_gamma(EtaSpec::fbm(0.5), 0.0, 0.5, 0.5, 20000, o);
    // E e^{Y+} with Y ~ N(-1/2, 1) equals 2 Phi(1/2)
    const double exact = std::erfc(-0.5 / std::sqrt(2.0));
    EXPECT_NEAR(e.value, exact, 4 * e.se);
}

TEST(HGamma, ImportanceAndPlainAgree)
{
    EstimatorOptions is, plain;
    plain.importance = false;
    is.seed = plain.seed = 11;
    const auto a = estimate_h_gamma(EtaSpec::fbm(0.5), 0.0, 1.0, 0.01, 20000, is);
    const auto b = estimate_h_gamma(EtaSpec::fbm(0.5), 0.0, 1.0, 0.01, 20000, plain);
    EXPECT_NEAR(a.fine_value, b.fine_value, 4 * std::hypot(a.fine_se, b.fine_se));
    EXPECT_LT(a.fine_se, b.fine_se);
}

TEST(HGamma, NonincreasingInOffset)
{
    EstimatorOptions o;
    o.seed = 5;
    const double xs[] = {0.0, 0.5, 1.0};
    const auto c = estimate_h_gamma_curve(EtaSpec::fbm(0.5), xs, 4.0, 0.01, 4000, o);
    for (std::size_t k = 0; k + 1 < c.estimates.size(); ++k) {
        EXPECT_LE(c.estimates[k + 1].value, c.estimates[k].value + 3 * c.diff_se[k]);
        EXPECT_GT(c.estimates[k].value, 0.0);
    }
}

TEST(HGamma, PositiveForSeveralIndices)
{
    for (double H : {0.25, 0.5, 0.9}) {
        EstimatorOptions o;
        const auto e = estimate_h_gamma(EtaSpec::fbm(H), 0.0, 2.0, 0.01, 1000, o);
        EXPECT_TRUE(std::isfinite(e.value));
        EXPECT_GT(e.value, 0.0) << H;
        EXPECT_GE(e.se, 0.0);
    }
}

TEST(HGamma, DeterministicAndThreadInvariant)
{
    EstimatorOptions a, b;
    a.threads = 1;
    b.threads = 3;
    const auto x = estimate_h_gamma(EtaSpec::fbm(0.7), 0.3, 2.0, 0.02, 500, a);
    const auto y = estimate_h_gamma(EtaSpec::fbm(0.7), 0.3, 2.0, 0.02, 500, b);
    EXPECT_EQ(x.value, y.value);
    EXPECT_EQ(x.se, y.se);
    EXPECT_EQ(x.to_json().dump(), y.to_json().dump());
}

TEST(HGamma, Preconditions)
{
    EXPECT_THROW(estimate_h_gamma(EtaSpec::fbm(0.5), 3.0, 2.0, 0.01, 100), DomainError);
    EXPECT_THROW(estimate_h_gamma(EtaSpec::fbm(0.5), 0.0, 1.0, 0.3, 100), DomainError);
}

TEST(HGammaRate, BrownianSlopeNearOne)
{
    EstimatorOptions o;
    o.seed = 2;
    const double S[] = {2.0, 4.0, 8.0};
    const auto r = estimate_h_gamma_rate(EtaSpec::fbm(0.5), 0.0, S, 0.005, 4000, o);
    EXPECT_FALSE(r.inconsistent);
    EXPECT_NEAR(r.rate.value, 1.0, 0.1);
    EXPECT_GE(r.rate.value, 0.0);
    EXPECT_EQ(r.per_S.size(), 3u);
    EXPECT_THROW(estimate_h_gamma_rate(EtaSpec::fbm(0.5), 0.0, std::vector<double>{2.0, 4.0}, 0.01, 100, o),
                 DomainError);
}

TEST(Piterbarg, ClosedFormAtZero)
{
    EstimatorOptions o;
    o.seed = 6;
    const auto e = estimate_piterbarg(1.0, 0.0, 12.0, 0.005, 10000, o);
    EXPECT_NEAR(e.value, 2.0, std::max(4 * e.se, 0.05));
    EXPECT_EQ(e.kind, ConstantKind::Piterbarg);
    EXPECT_TRUE(e.diagnostics["truncation_ok"].get<bool>());
}

TEST(Piterbarg, DecreasingInOffsetAndBelowOneAtS)
{
    EstimatorOptions o;
    o.seed = 8;
    double prev = 1e9;
    for (double x : {0.0, 1.0, 2.0}) {
        const auto e = estimate_piterbarg(1.0, x, 12.0, 0.01, 4000, o);
        EXPECT_LT(e.value, prev);
        prev = e.value;
    }
    const auto end = estimate_piterbarg(1.0, 12.0, 12.0, 0.01, 2000, o);
    EXPECT_LE(end.value, 1.0);
}

TEST(Piterbarg, TruncationStable)
{
    EstimatorOptions o;
    o.seed = 9;
    const auto a = estimate_piterbarg(2.0, 0.5, 8.0, 0.01, 4000, o);
    const auto b = estimate_piterbarg(2.0, 0.5, 16.0, 0.01, 4000, o);
    EXPECT_NEAR(a.value, b.value, 3 * std::hypot(a.se, b.se));
}

TEST(Piterbarg, ZeroOffsetCollapseIdentity)
{
    // at x = 0 both functionals equal sup W, so the integrand is e^{sup W}
    EstimatorOptions o;
    o.importance = false;
    o.seed = 10;
    const auto e = estimate_piterbarg(3.0, 0.0, 8.0, 0.01, 20000, o);
    EXPECT_NEAR(e.value, 1.0 + 1.0 / 3.0, std::max(4 * e.se, 0.03));
    EXPECT_THROW(estimate_piterbarg(0.0, 0.0, 8.0, 0.01, 100), DomainError);
}

TEST(ConstantEstimate, JsonCarriesConfig)
{
    EstimatorOptions o;
    const auto e = estimate_h_gamma(EtaSpec::fbm(0.5), 0.25, 1.0, 0.05, 200, o);
    const auto j = e.to_json();
    EXPECT_EQ(j["kind"], "h_gamma");
    EXPECT_EQ(j["config"]["replicas"], 200);
    EXPECT_DOUBLE_EQ(j["config"]["delta"].get<double>(), 0.05);
    EXPECT_TRUE(j["levels"]["richardson"].get<bool>());
}
