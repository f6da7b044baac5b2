#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mthdro/core.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

/// weight * U([lo, hi]) term of a mixture of uniforms.
struct UniformComponent {
    double weight = 1.0;
    double lo = 0.0;
    double hi = 1.0;
};

using UniformMixture = std::vector<UniformComponent>;

UniformMixture validated(const UniformMixture& mixture, const std::string& name);
double mixture_lower(const UniformMixture& mixture);
double mixture_upper(const UniformMixture& mixture);

/// How the clustered rectangle's budgets follow the radius eps.
enum class ClusteredBudgetRule {
    /// eps_k = inflation_k + max(0, eps - sum_k inflation_k) * share_k: the
    /// smallest inflated rectangle whose enclosing L1 radius is eps.
    Enclosing,
    /// eps_k = eps * share_k + inflation_k.
    Additive,
};

std::string to_string(ClusteredBudgetRule rule);
ClusteredBudgetRule parse_budget_rule(const std::string& text);

/// Power dispatch: buy the least x >= 0 with CVaR_alpha(d + xi_2 - xi_1 - x) <= 0.
struct ExperimentConfig {
    double d_nominal = 4.5;
    double alpha = 0.2;
    int N = 20;
    int trials = 500;
    std::vector<double> eps_grid = default_grid();
    int K1 = 9;
    int K2 = 8;
    double confidence = 0.9;
    std::uint64_t seed = 2024;
    UniformMixture xi1{{0.4, 11, 16}, {0.6, 24, 27}};
    UniformMixture xi2{{0.6, 3, 6}, {0.4, 10, 11}};
    /// Support box: the true support widened by this margin on every side.
    double support_margin = 10.0;
    /// Split of the radius over the two components of the rectangles.
    std::vector<double> budget_shares{0.5, 0.5};
    ClusteredBudgetRule clustered_rule = ClusteredBudgetRule::Enclosing;
    int workers = 0;  ///< 0: MTHDRO_THREADS or the hardware concurrency
    SolverConfig solver;

    void validate() const;
    static std::vector<double> default_grid();
};

/// Exact CVaR and VaR at tail mass alpha of d + xi_2 - xi_1 for independent
/// mixtures of uniforms, by piecewise polynomial integration.
struct TrueRisk {
    double var = 0.0;
    double cvar = 0.0;
};

TrueRisk true_dispatch_risk(const UniformMixture& xi1, const UniformMixture& xi2, double d, double alpha);

/// Draws from a mixture of uniforms with a portable uniform generator.
double sample_mixture(const UniformMixture& mixture, std::uint64_t& state);

struct ModelReport {
    std::string name;
    std::vector<double> confidence;  ///< per grid point
    /// Per trial: smallest grid radius whose decision meets the true CVaR
    /// constraint, +inf when none does, NaN for a failed trial.
    std::vector<double> eps_star;
    int eps_min_index = -1;  ///< -1 when the target confidence is never reached
    double eps_min = 0.0;
    std::vector<double> decisions;  ///< per successful trial, at eps_min
    double mean_decision = 0.0;
    int failures = 0;
    int solves = 0;

    int successful_trials() const;
};

struct ExperimentReport {
    ExperimentConfig config;
    TrueRisk truth;
    double mean_inflation_radius = 0.0;  ///< mean of inflation_1 + inflation_2 over trials
    std::vector<ModelReport> models;     ///< ball, mth, mth-cl

    const ModelReport& model(const std::string& name) const;
    /// model,epsilon,confidence,trials
    std::string confidence_csv() const;
    /// model,x_value,cum_prob
    std::string cdf_csv() const;
};

ExperimentReport run_power_dispatch(const ExperimentConfig& config);

}  // namespace mthdro
