#include "mthdro/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "mthdro/drccp.hpp"
#include "mthdro/parallel.hpp"
#include "mthdro/transport.hpp"

namespace mthdro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double next_uniform(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double pos_pow(double u, int k) { return u > 0.0 ? std::pow(u, k) : 0.0; }

// E[(X + Y - t)_+] (order 3) or P(X + Y > t) (order 2) for X ~ U[p1, p2], Y ~ U[q1, q2].
double uniform_sum_tail(double p1, double p2, double q1, double q2, double t, int order) {
    const double f = order == 3 ? 6.0 : 2.0;
    const double v = pos_pow(p2 + q2 - t, order) - pos_pow(p1 + q2 - t, order) - pos_pow(p2 + q1 - t, order) +
                     pos_pow(p1 + q1 - t, order);
    return v / (f * (p2 - p1) * (q2 - q1));
}

double dispatch_tail(const UniformMixture& xi1, const UniformMixture& xi2, double d, double t, int order) {
    double v = 0.0;
    for (const auto& a : xi2) {
        for (const auto& b : xi1) v += a.weight * b.weight * uniform_sum_tail(a.lo, a.hi, -b.hi, -b.lo, t - d, order);
    }
    return v;
}

const char* const kModelNames[] = {"ball", "mth", "mth-cl"};

struct TrialData {
    bool clustered_ok = true;
    std::vector<MthSpec> specs;  // ball, mth, mth-cl at zero budgets
    Vector inflation;
};

struct TrialOutcome {
    double eps_star = kNaN;
    std::map<int, double> decisions;
    int solves = 0;
};

}  // namespace

UniformMixture validated(const UniformMixture& mixture, const std::string& name) {
    require(!mixture.empty(), ErrorCode::InvalidArgument, name + " has no components");
    double total = 0.0;
    for (const auto& c : mixture) {
        require(c.weight >= 0.0 && c.lo < c.hi, ErrorCode::InvalidArgument,
                name + ": weights must be nonnegative and intervals nonempty");
        total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorCode::InvalidArgument, name + ": weights must sum to 1");
    return mixture;
}

double mixture_lower(const UniformMixture& mixture) {
    double v = kInf;
    for (const auto& c : mixture) v = std::min(v, c.lo);
    return v;
}

double mixture_upper(const UniformMixture& mixture) {
    double v = -kInf;
    for (const auto& c : mixture) v = std::max(v, c.hi);
    return v;
}

std::string to_string(ClusteredBudgetRule rule) {
    return rule == ClusteredBudgetRule::Enclosing ? "enclosing" : "additive";
}

ClusteredBudgetRule parse_budget_rule(const std::string& text) {
    if (text == "enclosing") return ClusteredBudgetRule::Enclosing;
    if (text == "additive") return ClusteredBudgetRule::Additive;
    throw Error(ErrorCode::InvalidArgument, "unknown clustered budget rule '" + text + "'");
}

std::vector<double> ExperimentConfig::default_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 600; ++i) g.push_back(0.0025 * i);
    return g;
}

void ExperimentConfig::validate() const {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    require(confidence > 0.0 && confidence < 1.0, ErrorCode::InvalidArgument, "confidence must lie in (0, 1)");
    require(trials >= 1, ErrorCode::InvalidArgument, "trials must be at least 1");
    require(N >= 2, ErrorCode::InvalidArgument, "N must be at least 2");
    require(K1 >= 1 && K1 <= N && K2 >= 1 && K2 <= N, ErrorCode::InvalidArgument, "cluster sizes must lie in [1, N]");
    require(!eps_grid.empty(), ErrorCode::InvalidArgument, "epsilon grid is empty");
    require(eps_grid.front() >= 0.0, ErrorCode::InvalidArgument, "epsilon grid must be nonnegative");
    for (std::size_t i = 1; i < eps_grid.size(); ++i) {
        require(eps_grid[i] > eps_grid[i - 1], ErrorCode::InvalidArgument, "epsilon grid must be strictly increasing");
    }
    require(support_margin >= 0.0, ErrorCode::InvalidArgument, "support margin must be nonnegative");
    require(budget_shares.size() == 2 && budget_shares[0] >= 0.0 && budget_shares[1] >= 0.0 &&
                std::abs(budget_shares[0] + budget_shares[1] - 1.0) <= 1e-12,
            ErrorCode::InvalidArgument, "budget shares must be two nonnegative numbers summing to 1");
    validated(xi1, "xi1");
    validated(xi2, "xi2");
    solver.validate();
}

TrueRisk true_dispatch_risk(const UniformMixture& xi1, const UniformMixture& xi2, double d, double alpha) {
    double lo = d + mixture_lower(xi2) - mixture_upper(xi1);
    double hi = d + mixture_upper(xi2) - mixture_lower(xi1);
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (dispatch_tail(xi1, xi2, d, mid, 2) > alpha ? lo : hi) = mid;
    }
    TrueRisk r;
    r.var = 0.5 * (lo + hi);
    r.cvar = r.var + dispatch_tail(xi1, xi2, d, r.var, 3) / alpha;
    return r;
}

double sample_mixture(const UniformMixture& mixture, std::uint64_t& state) {
    const double u = next_uniform(state);
    double acc = 0.0;
    const UniformComponent* pick = &mixture.back();
    for (const auto& c : mixture) {
        acc += c.weight;
        if (u < acc) {
            pick = &c;
            break;
        }
    }
    return pick->lo + (pick->hi - pick->lo) * next_uniform(state);
}

int ModelReport::successful_trials() const {
    return static_cast<int>(std::count_if(eps_star.begin(), eps_star.end(), [](double v) { return !std::isnan(v); }));
}

const ModelReport& ExperimentReport::model(const std::string& name) const {
    for (const auto& m : models) {
        if (m.name == name) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "no model named '" + name + "'");
}

std::string ExperimentReport::confidence_csv() const {
    std::string out = "model,epsilon,confidence,trials\n";
    char buf[128];
    for (const auto& m : models) {
        for (std::size_t i = 0; i < config.eps_grid.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%d\n", m.name.c_str(), config.eps_grid[i], m.confidence[i],
                          m.successful_trials());
            out += buf;
        }
    }
    return out;
}

std::string ExperimentReport::cdf_csv() const {
    std::string out = "model,x_value,cum_prob\n";
    char buf[128];
    for (const auto& m : models) {
        std::vector<double> x = m.decisions;
        std::sort(x.begin(), x.end());
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.10f,%.6f\n", m.name.c_str(), x[i],
                          static_cast<double>(i + 1) / static_cast<double>(x.size()));
            out += buf;
        }
    }
    return out;
}

ExperimentReport run_power_dispatch(const ExperimentConfig& config) {
    config.validate();
    const int workers = config.workers > 0 ? config.workers : worker_count();
    const int G = static_cast<int>(config.eps_grid.size());
    const int T = config.trials;

    ExperimentReport report;
    report.config = config;
    report.truth = true_dispatch_risk(config.xi1, config.xi2, config.d_nominal, config.alpha);
    const double target = report.truth.cvar;

    DrccpProblem problem;
    problem.g = Vector::Ones(1);
    problem.X = Polyhedron(-Matrix::Identity(1, 1), Vector::Zero(1));
    const double m = config.support_margin;
    problem.support = Polyhedron::box(
        (Vector(2) << mixture_lower(config.xi1) - m, mixture_lower(config.xi2) - m).finished(),
        (Vector(2) << mixture_upper(config.xi1) + m, mixture_upper(config.xi2) + m).finished());
    DrccpPiece piece;
    piece.xi_slope = (Vector(2) << -1.0, 1.0).finished();
    piece.x_slope = -Vector::Ones(1);
    piece.offset = config.d_nominal;
    problem.constraints.push_back({config.alpha, {piece}});

    const ComponentStructure ball_cs = ComponentStructure::single(2, Norm::L1);
    const ComponentStructure rect_cs({1, 1}, {Norm::L1, Norm::L1});
    const Vector shares = Eigen::Map<const Vector>(config.budget_shares.data(), 2);

    std::vector<TrialData> data(T);
    parallel_for(
        T,
        [&](std::size_t t) {
            std::uint64_t state = sub_seed(config.seed, t);
            Matrix xs(config.N, 2);
            for (int i = 0; i < config.N; ++i) {
                xs(i, 0) = sample_mixture(config.xi1, state);
                xs(i, 1) = sample_mixture(config.xi2, state);
            }
            const ProductDiscreteDistribution product(
                {DiscreteDistribution::uniform(xs.col(0)), DiscreteDistribution::uniform(xs.col(1))});
            auto& td = data[t];
            td.specs.emplace_back(DiscreteDistribution::uniform(xs), Vector::Zero(1), ball_cs);
            td.specs.emplace_back(product, Vector::Zero(2), rect_cs);
            ClusteringOptions opts;
            opts.strategy = ClusteringStrategy::ComponentWise;
            opts.K = {config.K1, config.K2};
            opts.seed = sub_seed(config.seed ^ 0xc1u, t);
            try {
                const ClusteringReport rep = cluster_reference(product, rect_cs, opts);
                td.inflation = rep.inflation;
                td.specs.emplace_back(rep.clustered(), Vector::Zero(2), rect_cs);
            } catch (const Error&) {
                td.clustered_ok = false;
                td.inflation = Vector::Zero(2);
                td.specs.push_back(td.specs.back());
            }
        },
        workers);

    auto budgets = [&](int model, const TrialData& td, double eps) -> Vector {
        if (model == 0) return Vector::Constant(1, eps);
        if (model == 1) return eps * shares;
        if (config.clustered_rule == ClusteredBudgetRule::Additive) return eps * shares + td.inflation;
        return td.inflation + std::max(0.0, eps - td.inflation.sum()) * shares;
    };

    auto decide = [&](int model, const TrialData& td, double eps, TrialOutcome& out) -> double {
        ++out.solves;
        const DrccpResult r = solve_drccp(td.specs[model].with_budgets(budgets(model, td, eps)), problem, config.solver);
        require(r.status == SolveStatus::Optimal, ErrorCode::SolverFailure,
                "dispatch program ended " + to_string(r.status));
        return r.x(0);
    };

    std::vector<std::vector<TrialOutcome>> outcomes(3, std::vector<TrialOutcome>(T));
    parallel_for(
        T * 3,
        [&](std::size_t job) {
            const int model = static_cast<int>(job % 3);
            const int t = static_cast<int>(job / 3);
            const TrialData& td = data[t];
            TrialOutcome& out = outcomes[model][t];
            if (model == 2 && !td.clustered_ok) return;
            try {
                auto meets = [&](int i) {
                    const double x = decide(model, td, config.eps_grid[i], out);
                    out.decisions[i] = x;
                    return x >= target - 1e-9;
                };
                if (meets(0)) {
                    out.eps_star = 0;
                } else if (!meets(G - 1)) {
                    out.eps_star = kInf;
                } else {
                    int lo = 0, hi = G - 1;
                    while (hi - lo > 1) {
                        const int mid = lo + (hi - lo) / 2;
                        (meets(mid) ? hi : lo) = mid;
                    }
                    out.eps_star = hi;
                }
            } catch (const Error&) {
                out.eps_star = kNaN;
            }
        },
        workers);

    for (int model = 0; model < 3; ++model) {
        ModelReport mr;
        mr.name = kModelNames[model];
        mr.confidence.assign(G, 0.0);
        std::vector<int> hits(G, 0);
        int ok = 0;
        for (int t = 0; t < T; ++t) {
            const auto& o = outcomes[model][t];
            mr.solves += o.solves;
            if (std::isnan(o.eps_star)) {
                mr.eps_star.push_back(kNaN);
                ++mr.failures;
                continue;
            }
            ++ok;
            if (std::isinf(o.eps_star)) {
                mr.eps_star.push_back(kInf);
                continue;
            }
            const int idx = static_cast<int>(o.eps_star);
            mr.eps_star.push_back(config.eps_grid[idx]);
            ++hits[idx];
        }
        int acc = 0;
        for (int i = 0; i < G; ++i) {
            acc += hits[i];
            mr.confidence[i] = ok > 0 ? static_cast<double>(acc) / ok : 0.0;
            if (mr.eps_min_index < 0 && ok > 0 && mr.confidence[i] >= config.confidence) mr.eps_min_index = i;
        }
        report.models.push_back(std::move(mr));
    }

    std::vector<std::vector<double>> at_min(3, std::vector<double>(T, kNaN));
    parallel_for(
        T * 3,
        [&](std::size_t job) {
            const int model = static_cast<int>(job % 3);
            const int t = static_cast<int>(job / 3);
            const int idx = report.models[model].eps_min_index;
            auto& out = outcomes[model][t];
            if (idx < 0 || std::isnan(out.eps_star)) return;
            auto it = out.decisions.find(idx);
            if (it != out.decisions.end()) {
                at_min[model][t] = it->second;
                return;
            }
            try {
                at_min[model][t] = decide(model, data[t], config.eps_grid[idx], out);
            } catch (const Error&) {
            }
        },
        workers);

    for (int model = 0; model < 3; ++model) {
        auto& mr = report.models[model];
        if (mr.eps_min_index >= 0) mr.eps_min = config.eps_grid[mr.eps_min_index];
        for (int t = 0; t < T; ++t) {
            if (!std::isnan(at_min[model][t])) mr.decisions.push_back(at_min[model][t]);
        }
        if (!mr.decisions.empty()) {
            mr.mean_decision = std::accumulate(mr.decisions.begin(), mr.decisions.end(), 0.0) /
                               static_cast<double>(mr.decisions.size());
        }
    }
    double infl = 0.0;
    int counted = 0;
    for (const auto& td : data) {
        if (!td.clustered_ok) continue;
        infl += td.inflation.sum();
        ++counted;
    }
    report.mean_inflation_radius = counted > 0 ? infl / counted : 0.0;
    return report;
}

}  // namespace mthdro
