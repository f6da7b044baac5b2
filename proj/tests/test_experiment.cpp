#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mthdro/experiment.hpp"
#include "mthdro/oracle.hpp"
#include "support/test_support.hpp"

using namespace mthdro;

namespace {

double draw(const UniformMixture& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0, 1);
    double u = U(rng);
    for (const auto& c : m) {
        if (u < c.weight) return c.lo + (c.hi - c.lo) * U(rng);
        u -= c.weight;
    }
    return m.back().lo + (m.back().hi - m.back().lo) * U(rng);
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.trials = 12;
    c.eps_grid.clear();
    for (int i = 0; i <= 40; ++i) c.eps_grid.push_back(0.05 * i);
    return c;
}

}  // namespace

TEST(TrueRisk, TriangularTailHasAClosedForm) {
    const UniformMixture u{{1.0, 0.0, 1.0}};
    const double alpha = 0.2;
    const double var = 1 - std::sqrt(2 * alpha);
    const TrueRisk r = true_dispatch_risk(u, u, 0.0, alpha);
    EXPECT_NEAR(r.var, var, 1e-10);
    EXPECT_NEAR(r.cvar, var + (1 - var) / 3, 1e-10);
    const TrueRisk shifted = true_dispatch_risk(u, u, 2.5, alpha);
    EXPECT_NEAR(shifted.cvar, r.cvar + 2.5, 1e-10);
}

TEST(TrueRisk, MatchesMonteCarloOnTheDefaultMixtures) {
    const ExperimentConfig c;
    const TrueRisk r = true_dispatch_risk(c.xi1, c.xi2, c.d_nominal, c.alpha);
    std::mt19937_64 rng(2718);
    const int n = 1'000'000;
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = c.d_nominal + draw(c.xi2, rng) - draw(c.xi1, rng);
    EXPECT_NEAR(empirical_cvar(z, c.alpha), r.cvar, 0.01);
    std::sort(z.data(), z.data() + n);
    EXPECT_NEAR(z(static_cast<int>((1 - c.alpha) * n)), r.var, 0.02);
}

TEST(Sampling, StaysInSupportAndMatchesTheMean) {
    const UniformMixture m{{0.4, 11, 16}, {0.6, 24, 27}};
    std::uint64_t state = 5;
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = sample_mixture(m, state);
        ASSERT_TRUE((x >= 11 && x <= 16) || (x >= 24 && x <= 27));
        sum += x;
    }
    EXPECT_NEAR(sum / n, 0.4 * 13.5 + 0.6 * 25.5, 0.05);
    std::uint64_t a = 9, b = 9;
    EXPECT_EQ(sample_mixture(m, a), sample_mixture(m, b));
}

TEST(ExperimentConfig, Validation) {
    EXPECT_NO_THROW(ExperimentConfig{}.validate());
    const auto rejects = [](auto mutate) {
        ExperimentConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), Error);
    };
    rejects([](ExperimentConfig& c) { c.alpha = 1.5; });
    rejects([](ExperimentConfig& c) { c.confidence = 1.0; });
    rejects([](ExperimentConfig& c) { c.trials = 0; });
    rejects([](ExperimentConfig& c) { c.eps_grid = {0.0, 0.2, 0.2}; });
    rejects([](ExperimentConfig& c) { c.K1 = 21; });
    rejects([](ExperimentConfig& c) { c.budget_shares = {0.7, 0.7}; });
    rejects([](ExperimentConfig& c) { c.xi1 = {{0.5, 0, 1}}; });
    const auto grid = ExperimentConfig::default_grid();
    EXPECT_DOUBLE_EQ(grid.front(), 0.0);
    EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
}

TEST(ExperimentConfig, BudgetRuleNames) {
    for (auto r : {ClusteredBudgetRule::Enclosing, ClusteredBudgetRule::Additive}) {
        EXPECT_EQ(parse_budget_rule(to_string(r)), r);
    }
    EXPECT_THROW(parse_budget_rule("half"), Error);
}

TEST(PowerDispatch, ConfidenceCurvesRiseToOne) {
    ExperimentConfig c = small_config();
    c.eps_grid.push_back(6.0);
    const ExperimentReport rep = run_power_dispatch(c);
    ASSERT_EQ(rep.models.size(), 3u);
    for (const auto& m : rep.models) {
        EXPECT_EQ(m.failures, 0) << m.name;
        ASSERT_EQ(m.confidence.size(), c.eps_grid.size());
        EXPECT_TRUE(std::is_sorted(m.confidence.begin(), m.confidence.end())) << m.name;
        EXPECT_DOUBLE_EQ(m.confidence.back(), 1.0) << m.name;
        ASSERT_GE(m.eps_min_index, 0) << m.name;
        EXPECT_GE(m.confidence[m.eps_min_index], c.confidence);
        if (m.eps_min_index > 0) {
            EXPECT_LT(m.confidence[m.eps_min_index - 1], c.confidence);
        }
        int met = 0;
        for (double x : m.decisions) met += x >= rep.truth.cvar - 1e-9;
        EXPECT_GE(met, std::ceil(c.confidence * m.decisions.size()) - 1e-9) << m.name;
    }
    EXPECT_GT(rep.mean_inflation_radius, 0.0);
}

TEST(PowerDispatch, ReportBytesAreDeterministicAcrossWorkerCounts) {
    ExperimentConfig c = small_config();
    c.workers = 1;
    const ExperimentReport a = run_power_dispatch(c);
    c.workers = 3;
    const ExperimentReport b = run_power_dispatch(c);
    EXPECT_EQ(a.confidence_csv(), b.confidence_csv());
    EXPECT_EQ(a.cdf_csv(), b.cdf_csv());
    c.seed += 1;
    EXPECT_NE(run_power_dispatch(c).cdf_csv(), a.cdf_csv());
}

TEST(PowerDispatch, CsvLayout) {
    const ExperimentReport rep = run_power_dispatch(small_config());
    const std::string conf = rep.confidence_csv();
    const std::string cdf = rep.cdf_csv();
    EXPECT_EQ(conf.substr(0, conf.find('\n')), "model,epsilon,confidence,trials");
    EXPECT_EQ(cdf.substr(0, cdf.find('\n')), "model,x_value,cum_prob");
    EXPECT_EQ(std::count(conf.begin(), conf.end(), '\n'), 1 + 3 * 41);
    EXPECT_NE(conf.find("mth-cl,0.000000,"), std::string::npos);
    EXPECT_THROW(rep.model("nope"), Error);
}
