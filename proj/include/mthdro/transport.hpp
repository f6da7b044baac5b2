#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mthdro/core.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

/// Coupling between two discrete distributions with its per-component costs
/// sum_ab plan_ab * rho_k(pr_k(src_a), pr_k(tgt_b))^p.
struct TransportPlan {
    Matrix plan;
    Vector per_component_costs;
};

TransportPlan make_plan(const DiscreteDistribution& source, const DiscreteDistribution& target, Matrix plan,
                        const ComponentStructure& structure);

struct WassersteinResult {
    double distance = 0.0;
    TransportPlan plan;
};

/// W_p under a single ground norm, by the transportation simplex.
WassersteinResult wasserstein(const DiscreteDistribution& P, const DiscreteDistribution& Q, Norm norm, int p);
/// Same, with the ground cost sum_k rho_k^p of a component structure.
WassersteinResult wasserstein(const DiscreteDistribution& P, const DiscreteDistribution& Q,
                              const ComponentStructure& structure);

enum class ClusteringStrategy { Direct, ComponentWise, MultiComponent };

struct LloydResult {
    DiscreteDistribution clustered;
    std::vector<int> assignment;       ///< point -> centroid
    TransportPlan plan;                ///< assignment plan, points x centroids
    std::vector<double> cost_history;  ///< transport cost after seeding and after each accepted update
    int iterations = 0;
};

/// Weighted Lloyd quantization to at most K atoms. Seeding is k-means++
/// driven by `seed`; centroids are weighted means for p = 2 and weighted
/// coordinate-wise medians for p = 1. An update that would raise the cost is
/// rejected and ends the iteration, so cost_history never increases.
LloydResult lloyd_quantize(const Matrix& points, const Vector& weights, int K, const ComponentStructure& structure,
                           std::uint64_t seed, int max_iterations = 500);
LloydResult lloyd_quantize(const Matrix& points, const Vector& weights, int K, Norm norm, int p, std::uint64_t seed,
                           int max_iterations = 500);

struct ClusteringReport {
    std::vector<DiscreteDistribution> blocks;  ///< clustered factor per block of components
    std::vector<TransportPlan> plans;  ///< one per clustered block
    std::vector<std::vector<double>> cost_histories;
    Vector inflation;                  ///< per component, eps_k = cost_k^(1/p)
    ClusteringStrategy strategy = ClusteringStrategy::Direct;
    std::vector<std::vector<int>> groups;  ///< components per clustered block

    ProductDiscreteDistribution clustered() const { return ProductDiscreteDistribution(blocks); }
};

struct ClusteringOptions {
    ClusteringStrategy strategy = ClusteringStrategy::ComponentWise;
    /// Total K (Direct) or K per block (ComponentWise: per component; MultiComponent: per group).
    std::vector<int> K;
    /// MultiComponent only: number of consecutive components in each group.
    std::vector<int> group_sizes;
    std::uint64_t seed = 0;
    /// Direct and MultiComponent: replace the Lloyd assignment plan by an
    /// exact transport plan before measuring the inflation.
    bool exact_inflation = false;
    std::size_t cap = kDefaultExpansionCap;
    int max_iterations = 500;
};

ClusteringReport cluster_reference(const ProductDiscreteDistribution& product, const ComponentStructure& structure,
                                   const ClusteringOptions& options);

/// eps + inflation, componentwise.
Vector inflate_budgets(const Vector& base, const ClusteringReport& report);

/// K = round(N^q), capped by `cap`.
std::size_t cluster_count_for_rate(std::size_t N, double q, std::size_t cap = kDefaultExpansionCap);

std::string to_string(ClusteringStrategy strategy);
ClusteringStrategy parse_strategy(const std::string& text);

}  // namespace mthdro
