#include "mthdro/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "mthdro/parallel.hpp"

namespace mthdro {

TransportPlan make_plan(const DiscreteDistribution& source, const DiscreteDistribution& target, Matrix plan,
                        const ComponentStructure& structure) {
    require(plan.rows() == source.size() && plan.cols() == target.size(), ErrorCode::DimensionMismatch,
            "plan shape differs from the marginals");
    TransportPlan out;
    out.per_component_costs = Vector::Zero(structure.components());
    for (int a = 0; a < source.size(); ++a) {
        const Vector sa = source.atom(a);
        for (int b = 0; b < target.size(); ++b) {
            if (plan(a, b) == 0.0) continue;
            const Vector tb = target.atom(b);
            for (int k = 0; k < structure.components(); ++k) {
                out.per_component_costs(k) += plan(a, b) * std::pow(structure.distance(k, sa, tb), structure.p());
            }
        }
    }
    out.plan = std::move(plan);
    return out;
}

WassersteinResult wasserstein(const DiscreteDistribution& P, const DiscreteDistribution& Q,
                              const ComponentStructure& structure) {
    require(P.dim() == Q.dim() && P.dim() == structure.total_dim(), ErrorCode::DimensionMismatch,
            "distributions live in different dimensions");
    Matrix C(P.size(), Q.size());
    for (int a = 0; a < P.size(); ++a) {
        const Vector pa = P.atom(a);
        for (int b = 0; b < Q.size(); ++b) C(a, b) = structure.transport_cost(pa, Q.atom(b));
    }
    TransportResult r = solve_lp_transportation(C, P.weights(), Q.weights());
    WassersteinResult out;
    out.distance = std::pow(std::max(0.0, r.value), 1.0 / structure.p());
    out.plan = make_plan(P, Q, std::move(r.plan), structure);
    return out;
}

WassersteinResult wasserstein(const DiscreteDistribution& P, const DiscreteDistribution& Q, Norm norm, int p) {
    require(P.dim() == Q.dim(), ErrorCode::DimensionMismatch, "distributions live in different dimensions");
    return wasserstein(P, Q, ComponentStructure::single(P.dim(), norm, p));
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int draw(std::mt19937_64& rng, const std::vector<double>& mass) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    double u = unit_uniform(rng) * total;
    int last = -1;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] <= 0.0) continue;
        last = static_cast<int>(i);
        if (u < mass[i]) return last;
        u -= mass[i];
    }
    return last;
}

double weighted_median(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& e : vw) total += e.second;
    double acc = 0.0;
    for (const auto& e : vw) {
        acc += e.second;
        if (acc >= 0.5 * total) return e.first;
    }
    return vw.back().first;
}

class Lloyd {
public:
    Lloyd(const Matrix& points, const Vector& weights, const ComponentStructure& cs)
        : X_(points), w_(weights), cs_(cs), N_(static_cast<int>(points.rows())) {}

    double cost(int i, const Matrix& C, int c) const {
        return cs_.transport_cost(X_.row(i).transpose(), C.row(c).transpose());
    }

    // Nearest centroid per point (lowest index on ties); returns total cost.
    double assign(const Matrix& C, std::vector<int>& a) const {
        a.assign(N_, 0);
        double total = 0.0;
        for (int i = 0; i < N_; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < C.rows(); ++c) {
                const double v = cost(i, C, c);
                if (v < best) {
                    best = v;
                    a[i] = c;
                }
            }
            total += w_(i) * best;
        }
        return total;
    }

    // Moves centroids of empty clusters onto the currently worst-served point.
    double repair(Matrix& C, std::vector<int>& a) const {
        double total = assign(C, a);
        for (int guard = 0; guard < C.rows(); ++guard) {
            std::vector<double> mass(C.rows(), 0.0);
            for (int i = 0; i < N_; ++i) mass[a[i]] += w_(i);
            int empty = -1;
            for (int c = 0; c < C.rows() && empty < 0; ++c) {
                if (mass[c] <= 0.0) empty = c;
            }
            if (empty < 0) break;
            int far = -1;
            double worst = 0.0;
            for (int i = 0; i < N_; ++i) {
                const double v = cost(i, C, a[i]);
                if (v > worst) {
                    worst = v;
                    far = i;
                }
            }
            if (far < 0) break;
            C.row(empty) = X_.row(far);
            total = assign(C, a);
        }
        return total;
    }

    Matrix seed(int K, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        Matrix C(K, X_.cols());
        std::vector<double> mass(w_.data(), w_.data() + N_);
        C.row(0) = X_.row(draw(rng, mass));
        std::vector<double> dist(N_, std::numeric_limits<double>::infinity());
        for (int c = 1; c < K; ++c) {
            for (int i = 0; i < N_; ++i) {
                dist[i] = std::min(dist[i], cost(i, C, c - 1));
                mass[i] = w_(i) * dist[i];
            }
            const int pick = draw(rng, mass);
            // all points already coincide with centroids: duplicate the first
            if (pick >= 0) {
                C.row(c) = X_.row(pick);
            } else {
                C.row(c) = C.row(0);
            }
        }
        return C;
    }

    Matrix update(const Matrix& C, const std::vector<int>& a) const {
        Matrix out = C;
        for (int c = 0; c < C.rows(); ++c) {
            std::vector<int> members;
            for (int i = 0; i < N_; ++i) {
                if (a[i] == c) members.push_back(i);
            }
            if (members.empty()) continue;
            if (cs_.p() == 2) {
                Vector acc = Vector::Zero(X_.cols());
                double m = 0.0;
                for (int i : members) {
                    acc += w_(i) * X_.row(i).transpose();
                    m += w_(i);
                }
                out.row(c) = (acc / m).transpose();
            } else {
                for (int t = 0; t < X_.cols(); ++t) {
                    std::vector<std::pair<double, double>> vw;
                    for (int i : members) vw.emplace_back(X_(i, t), w_(i));
                    out(c, t) = weighted_median(std::move(vw));
                }
            }
        }
        return out;
    }

private:
    const Matrix& X_;
    const Vector& w_;
    const ComponentStructure& cs_;
    int N_;
};

}  // namespace

LloydResult lloyd_quantize(const Matrix& points, const Vector& weights, int K, const ComponentStructure& structure,
                           std::uint64_t seed, int max_iterations) {
    const int N = static_cast<int>(points.rows());
    require(N >= 1, ErrorCode::InvalidArgument, "no points to cluster");
    require(weights.size() == N, ErrorCode::DimensionMismatch, "weights and points differ in length");
    require(points.cols() == structure.total_dim(), ErrorCode::DimensionMismatch, "points and structure dimensions");
    require(K >= 1 && K <= N, ErrorCode::InvalidArgument, "K must lie in [1, number of points]");
    require((weights.array() >= 0.0).all() && weights.sum() > 0.0, ErrorCode::InvalidArgument,
            "weights must be nonnegative with positive mass");
    const Lloyd lloyd(points, weights, structure);
    Matrix C = lloyd.seed(K, seed);
    std::vector<int> a;
    double current = lloyd.repair(C, a);
    std::vector<double> history{current};
    int it = 0;
    for (; it < max_iterations; ++it) {
        Matrix next = lloyd.update(C, a);
        std::vector<int> b;
        const double c2 = lloyd.repair(next, b);
        if (c2 > current) break;
        const bool fixed = b == a;
        C = std::move(next);
        a = std::move(b);
        current = c2;
        history.push_back(current);
        if (fixed) break;
    }
    // keep occupied centroids only, in centroid order
    std::vector<int> remap(C.rows(), -1);
    std::vector<double> mass(C.rows(), 0.0);
    for (int i = 0; i < N; ++i) mass[a[i]] += weights(i);
    int kept = 0;
    for (int c = 0; c < C.rows(); ++c) {
        if (mass[c] > 0.0) remap[c] = kept++;
    }
    Matrix atoms(kept, points.cols());
    Vector w(kept);
    for (int c = 0; c < C.rows(); ++c) {
        if (remap[c] < 0) continue;
        atoms.row(remap[c]) = C.row(c);
        w(remap[c]) = mass[c];
    }
    const double total = weights.sum();
    Matrix plan = Matrix::Zero(N, kept);
    for (int i = 0; i < N; ++i) {
        a[i] = remap[a[i]];
        plan(i, a[i]) = weights(i) / total;
    }
    DiscreteDistribution clustered(atoms, w / total);
    const DiscreteDistribution source(points, weights / total);
    TransportPlan tp = make_plan(source, clustered, std::move(plan), structure);
    for (double& h : history) h /= total;
    return LloydResult{std::move(clustered), std::move(a), std::move(tp), std::move(history), it};
}

LloydResult lloyd_quantize(const Matrix& points, const Vector& weights, int K, Norm norm, int p, std::uint64_t seed,
                           int max_iterations) {
    return lloyd_quantize(points, weights, K, ComponentStructure::single(static_cast<int>(points.cols()), norm, p), seed,
                          max_iterations);
}

namespace {

ComponentStructure sub_structure(const ComponentStructure& cs, int first, int count) {
    std::vector<int> dims(cs.dims().begin() + first, cs.dims().begin() + first + count);
    std::vector<Norm> norms(cs.norms().begin() + first, cs.norms().begin() + first + count);
    return ComponentStructure(std::move(dims), std::move(norms), cs.p());
}

struct BlockResult {
    DiscreteDistribution clustered;
    TransportPlan plan;
    std::vector<double> history;
};

// Clusters the product of `count` consecutive marginals starting at `first`.
BlockResult cluster_block(const ProductDiscreteDistribution& product, const ComponentStructure& cs, int first,
                          int count, int K, const ClusteringOptions& options, std::uint64_t seed) {
    std::vector<DiscreteDistribution> margs(product.marginals().begin() + first,
                                            product.marginals().begin() + first + count);
    const DiscreteDistribution flat =
        count == 1 ? margs.front() : expand_product(ProductDiscreteDistribution(std::move(margs)), options.cap);
    const ComponentStructure sub = sub_structure(cs, first, count);
    require(K >= 1 && K <= flat.size(), ErrorCode::InvalidArgument, "cluster count must lie in [1, block size]");
    LloydResult lr = lloyd_quantize(flat.atoms(), flat.weights(), K, sub, seed, options.max_iterations);
    TransportPlan plan = std::move(lr.plan);
    const bool exact = options.exact_inflation || options.strategy == ClusteringStrategy::ComponentWise;
    if (exact) plan = wasserstein(flat, lr.clustered, sub).plan;
    return {std::move(lr.clustered), std::move(plan), std::move(lr.cost_history)};
}

}  // namespace

ClusteringReport cluster_reference(const ProductDiscreteDistribution& product, const ComponentStructure& structure,
                                   const ClusteringOptions& options) {
    const int n = structure.components();
    require(product.factors() == n, ErrorCode::DimensionMismatch, "one marginal per component is required");
    for (int k = 0; k < n; ++k) {
        require(product.marginal(k).dim() == structure.dim(k), ErrorCode::DimensionMismatch,
                "marginal " + std::to_string(k) + " has the wrong dimension");
    }
    std::vector<int> sizes;
    switch (options.strategy) {
        case ClusteringStrategy::Direct:
            sizes = {n};
            break;
        case ClusteringStrategy::ComponentWise:
            sizes.assign(n, 1);
            break;
        case ClusteringStrategy::MultiComponent:
            sizes = options.group_sizes;
            require(!sizes.empty() && std::all_of(sizes.begin(), sizes.end(), [](int s) { return s >= 1; }) &&
                        std::accumulate(sizes.begin(), sizes.end(), 0) == n,
                    ErrorCode::InvalidArgument, "group sizes must be positive and sum to the component count");
            break;
    }
    require(options.K.size() == sizes.size(), ErrorCode::InvalidArgument,
            "expected " + std::to_string(sizes.size()) + " cluster counts");
    ClusteringReport report;
    report.strategy = options.strategy;
    report.inflation = Vector::Zero(n);
    std::vector<int> first(sizes.size(), 0);
    for (std::size_t g = 1; g < sizes.size(); ++g) first[g] = first[g - 1] + sizes[g - 1];
    std::vector<std::optional<BlockResult>> results(sizes.size());
    parallel_for(sizes.size(), [&](std::size_t g) {
        results[g] = cluster_block(product, structure, first[g], sizes[g], options.K[g], options, sub_seed(options.seed, g));
    });
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        BlockResult& r = *results[g];
        std::vector<int> comps;
        for (int t = 0; t < sizes[g]; ++t) {
            const int k = first[g] + t;
            comps.push_back(k);
            report.inflation(k) = std::pow(std::max(0.0, r.plan.per_component_costs(t)), 1.0 / structure.p());
        }
        report.groups.push_back(std::move(comps));
        report.blocks.push_back(std::move(r.clustered));
        report.plans.push_back(std::move(r.plan));
        report.cost_histories.push_back(std::move(r.history));
    }
    return report;
}

Vector inflate_budgets(const Vector& base, const ClusteringReport& report) {
    require(base.size() == report.inflation.size(), ErrorCode::DimensionMismatch,
            "budget and inflation lengths differ");
    return base + report.inflation;
}

std::size_t cluster_count_for_rate(std::size_t N, double q, std::size_t cap) {
    require(N >= 2, ErrorCode::InvalidArgument, "N must be at least 2");
    require(q >= 1.0, ErrorCode::InvalidArgument, "q must be at least 1");
    const double K = std::round(std::pow(static_cast<double>(N), q));
    return K >= static_cast<double>(cap) ? cap : static_cast<std::size_t>(K);
}

std::string to_string(ClusteringStrategy strategy) {
    switch (strategy) {
        case ClusteringStrategy::Direct:
            return "direct";
        case ClusteringStrategy::ComponentWise:
            return "component-wise";
        case ClusteringStrategy::MultiComponent:
            return "multi-component";
    }
    return "unknown";
}

ClusteringStrategy parse_strategy(const std::string& text) {
    if (text == "direct") return ClusteringStrategy::Direct;
    if (text == "component-wise" || text == "componentwise") return ClusteringStrategy::ComponentWise;
    if (text == "multi-component" || text == "multicomponent") return ClusteringStrategy::MultiComponent;
    throw Error(ErrorCode::InvalidArgument, "unknown clustering strategy '" + text + "'");
}

}  // namespace mthdro
