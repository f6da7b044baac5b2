#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mthdro/drccp.hpp"
#include "mthdro/experiment.hpp"
#include "mthdro/io.hpp"
#include "mthdro/oracle.hpp"
#include "mthdro/reformulate.hpp"
#include "mthdro/transport.hpp"
#include "mthdro/uq.hpp"

using namespace mthdro;
using io::Json;

namespace {

enum Exit { kOk = 0, kError = 1, kInfeasible = 2, kUnbounded = 3 };

struct Flags {
    std::string input;
    std::string out;
    std::string format = "json";
    std::optional<int> p;
    std::vector<std::string> norms;
    std::vector<double> budgets;
    std::optional<std::size_t> cap;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool drop_empty = false;

    io::Overrides overrides() const {
        io::Overrides o;
        o.p = p;
        if (!norms.empty()) {
            std::vector<Norm> ns;
            for (const auto& n : norms) ns.push_back(parse_norm(n));
            o.norms = ns;
        }
        if (!budgets.empty()) o.budgets = budgets;
        if (cap) o.cap = *cap;
        return o;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json envelope(const std::string& command, const std::string& status) {
    return Json{{"schema_version", io::kSchemaVersion}, {"command", command}, {"status", status}};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    out << text;
}

// csv: one "key,index,value" row per scalar, variable groups flattened.
std::string as_csv(const Json& result) {
    std::ostringstream s;
    s << "# schema_version," << io::kSchemaVersion << "\n";
    s << "key,index,value\n";
    s << "status,0," << result.at("status").get<std::string>() << "\n";
    if (result.contains("value") && result["value"].is_number()) s << "value,0," << number(result["value"]) << "\n";
    if (result.contains("variables")) {
        for (auto it = result["variables"].begin(); it != result["variables"].end(); ++it) {
            for (std::size_t i = 0; i < it->size(); ++i) s << it.key() << "," << i << "," << number((*it)[i]) << "\n";
        }
    }
    if (result.contains("inflation")) {
        for (std::size_t i = 0; i < result["inflation"].size(); ++i) s << "inflation," << i << "," << number(result["inflation"][i]) << "\n";
    }
    return s.str();
}

void emit(const Flags& f, const Json& result) {
    if (f.format == "csv") {
        write_text(f.out, as_csv(result));
    } else {
        write_text(f.out, result.dump(2) + "\n");
    }
}

int exit_for(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal:
            return kOk;
        case SolveStatus::Infeasible:
            return kInfeasible;
        case SolveStatus::Unbounded:
            return kUnbounded;
        case SolveStatus::NumericalFailure:
            break;
    }
    return kError;
}

int report_unbounded(const Flags& f, const std::string& command, const std::string& why, Clock::time_point t0) {
    Json r = envelope(command, to_string(SolveStatus::Unbounded));
    r["value"] = nullptr;
    r["message"] = why;
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return kUnbounded;
}

int cmd_solve(const Flags& f) {
    const auto t0 = Clock::now();
    const Json doc = io::parse_file(f.input);
    const MthSpec mth = io::read_mth(doc, f.overrides());
    const int d = mth.dim();
    require(doc.contains("objective"), ErrorCode::SchemaViolation, "/objective: required field is missing");
    const Json& obj = doc["objective"];
    const std::string type = obj.contains("type") ? obj["type"].get<std::string>() : "pwa";
    ConicProgram program = [&] {
        if (type == "pwa") return build_dro_pwa(mth, io::read_pwa(obj, "/objective", d), io::read_support(doc, d));
        if (type == "quadratic") {
            QuadraticOptions qo;
            if (obj.contains("nonnegative_epigraph")) qo.nonnegative_epigraph = obj["nonnegative_epigraph"].get<bool>();
            return build_dro_quadratic(mth, io::read_quadratic(obj, "/objective", d), qo);
        }
        throw Error(ErrorCode::SchemaViolation, "/objective/type: expected \"pwa\" or \"quadratic\"");
    }();
    const ProgramDimensions dims = program.dimensions();
    Solution sol;
    try {
        sol = solve_dro(program);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnboundedValue) return report_unbounded(f, "solve", e.what(), t0);
        throw;
    }
    Json r = envelope("solve", to_string(sol.status));
    r["value"] = sol.value;
    r["variables"] = io::variables_json(sol);
    r["dimensions"] = io::to_json(dims);
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return exit_for(sol.status);
}

int cmd_uq(const Flags& f) {
    const auto t0 = Clock::now();
    const Json doc = io::parse_file(f.input);
    const MthSpec mth = io::read_mth(doc, f.overrides());
    UqOptions opt;
    opt.drop_empty = f.drop_empty;
    if (f.cap) opt.enumeration_cap = *f.cap;
    const bool miss = doc.contains("open_union");
    const UqResult res = miss ? worst_case_miss_probability(mth, io::read_open_union(doc, mth.dim()), opt)
                              : worst_case_probability(mth, io::read_union(doc, mth.dim()), opt);
    Json r = envelope("uq", to_string(SolveStatus::Optimal));
    r["mode"] = miss ? "miss" : "probability";
    r["value"] = res.value;
    r["variables"] = io::variables_json(res.solution);
    r["kept"] = res.kept;
    if (miss) r["indices"] = res.indices;
    r["dimensions"] = io::to_json(res.dimensions);
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return kOk;
}

int cmd_drccp(const Flags& f, const std::string& samples) {
    const auto t0 = Clock::now();
    Json doc = io::parse_file(f.input);
    if (!samples.empty()) doc["reference"] = Json{{"atoms", io::to_json(io::read_csv_matrix(samples))}};
    const MthSpec mth = io::read_mth(doc, f.overrides());
    const DrccpProblem problem = io::read_drccp(doc, mth.dim());
    DrccpResult res;
    try {
        res = solve_drccp(mth, problem);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InfeasibleX) {
            Json r = envelope("drccp", to_string(SolveStatus::Infeasible));
            r["value"] = nullptr;
            r["message"] = e.what();
            r["wall_time_seconds"] = seconds_since(t0);
            emit(f, r);
            return kInfeasible;
        }
        if (e.code() == ErrorCode::UnboundedValue) return report_unbounded(f, "drccp", e.what(), t0);
        throw;
    }
    Json r = envelope("drccp", to_string(res.status));
    r["value"] = res.status == SolveStatus::Optimal ? Json(res.value) : Json(nullptr);
    r["x"] = io::to_json(res.x);
    r["variables"] = io::variables_json(res.solution);
    r["dimensions"] = io::to_json(res.dimensions);
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return exit_for(res.status);
}

struct ClusterFlags {
    std::vector<int> dims;
    std::vector<int> K;
    std::vector<int> groups;
    std::string strategy = "componentwise";
    bool exact = false;
};

int cmd_cluster(const Flags& f, const ClusterFlags& c) {
    const auto t0 = Clock::now();
    const Matrix samples = io::read_csv_matrix(f.input);
    std::vector<int> dims = c.dims.empty() ? std::vector<int>(samples.cols(), 1) : c.dims;
    std::vector<Norm> norms;
    for (const auto& n : f.norms) norms.push_back(parse_norm(n));
    if (norms.empty()) norms.assign(dims.size(), Norm::L1);
    const ComponentStructure cs(dims, norms, f.p.value_or(1));
    require(cs.total_dim() == samples.cols(), ErrorCode::DimensionMismatch,
            "samples have " + std::to_string(samples.cols()) + " columns, structure needs " + std::to_string(cs.total_dim()));
    std::vector<DiscreteDistribution> marginals;
    for (int k = 0; k < cs.components(); ++k) {
        marginals.push_back(DiscreteDistribution::uniform(samples.middleCols(cs.offset(k), cs.dim(k))));
    }
    ClusteringOptions opt;
    opt.strategy = parse_strategy(c.strategy);
    opt.K = c.K;
    opt.group_sizes = c.groups;
    opt.seed = f.seed;
    opt.exact_inflation = c.exact;
    if (f.cap) opt.cap = *f.cap;
    const ClusteringReport rep = cluster_reference(ProductDiscreteDistribution(marginals), cs, opt);
    Json r = envelope("cluster", to_string(SolveStatus::Optimal));
    r["strategy"] = to_string(rep.strategy);
    r["structure"] = Json{{"dims", cs.dims()}, {"norms", Json::array()}, {"p", cs.p()}};
    for (Norm n : cs.norms()) r["structure"]["norms"].push_back(to_string(n));
    Json blocks = Json::array();
    for (const auto& b : rep.blocks) blocks.push_back(io::to_json(b));
    r["reference"] = Json{{"marginals", blocks}};
    r["groups"] = rep.groups;
    r["inflation"] = io::to_json(rep.inflation);
    if (!f.budgets.empty()) {
        const Vector base = Eigen::Map<const Vector>(f.budgets.data(), static_cast<int>(f.budgets.size()));
        r["budgets"] = io::to_json(inflate_budgets(base, rep));
    }
    r["cost_histories"] = rep.cost_histories;
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return kOk;
}

Json model_json(const ModelReport& m) {
    Json j{{"name", m.name},
           {"eps_min", m.eps_min_index >= 0 ? Json(m.eps_min) : Json(nullptr)},
           {"mean_decision", m.eps_min_index >= 0 ? Json(m.mean_decision) : Json(nullptr)},
           {"successful_trials", m.successful_trials()},
           {"failures", m.failures},
           {"solves", m.solves}};
    return j;
}

struct ExperimentFlags {
    std::string config;
    std::string out_dir = ".";
    std::optional<int> trials;
    std::optional<std::string> rule;
    std::optional<int> workers;
};

int cmd_experiment(const Flags& f, const ExperimentFlags& e) {
    const auto t0 = Clock::now();
    ExperimentConfig config;
    if (!e.config.empty()) config = io::read_experiment_config(io::parse_file(e.config));
    if (e.trials) config.trials = *e.trials;
    if (e.rule) config.clustered_rule = parse_budget_rule(*e.rule);
    if (e.workers) config.workers = *e.workers;
    if (f.seed_set) config.seed = f.seed;
    if (!f.budgets.empty()) config.budget_shares = f.budgets;
    const ExperimentReport rep = run_power_dispatch(config);
    std::filesystem::create_directories(e.out_dir);
    const std::filesystem::path dir(e.out_dir);
    const std::string header = std::string("# schema_version,") + io::kSchemaVersion + "\n";
    write_text((dir / "confidence.csv").string(), header + rep.confidence_csv());
    write_text((dir / "cdf.csv").string(), header + rep.cdf_csv());
    Json r = envelope("experiment", "completed");
    r["config"] = io::to_json(rep.config);
    r["truth"] = Json{{"var", rep.truth.var}, {"cvar", rep.truth.cvar}};
    r["mean_inflation_radius"] = rep.mean_inflation_radius;
    r["models"] = Json::array();
    for (const auto& m : rep.models) r["models"].push_back(model_json(m));
    write_text((dir / "report.json").string(), r.dump(2) + "\n");
    for (const auto& m : rep.models) {
        std::fprintf(stderr, "%-7s eps_min=%s mean_x=%s failures=%d\n", m.name.c_str(),
                     m.eps_min_index >= 0 ? number(m.eps_min).c_str() : "none", number(m.mean_decision).c_str(),
                     m.failures);
    }
    std::fprintf(stderr, "wall time %.2f s\n", seconds_since(t0));
    return kOk;
}

int cmd_oracle(const Flags& f) {
    const auto t0 = Clock::now();
    const Json doc = io::parse_file(f.input);
    const MthSpec mth = io::read_mth(doc, f.overrides());
    const int d = mth.dim();
    require(doc.contains("objective"), ErrorCode::SchemaViolation, "/objective: required field is missing");
    require(doc.contains("grid"), ErrorCode::SchemaViolation, "/grid: required field is missing");
    const Json& obj = doc["objective"];
    const std::string type = obj.contains("type") ? obj["type"].get<std::string>() : "pwa";
    Objective h;
    if (type == "pwa") {
        h = [g = io::read_pwa(obj, "/objective", d)](const Eigen::Ref<const Vector>& xi) { return g(xi); };
    } else if (type == "quadratic") {
        h = [g = io::read_quadratic(obj, "/objective", d)](const Eigen::Ref<const Vector>& xi) { return g(xi); };
    } else {
        throw Error(ErrorCode::SchemaViolation, "/objective/type: expected \"pwa\" or \"quadratic\"");
    }
    const GridSpec grid = io::read_grid(doc["grid"], "/grid", d);
    const double v = primal_grid_value(mth, h, grid, io::read_support(doc, d));
    Json r = envelope("oracle", to_string(SolveStatus::Optimal));
    r["value"] = v;
    r["wall_time_seconds"] = seconds_since(t0);
    emit(f, r);
    return kOk;
}

void add_common(CLI::App* sub, Flags& f, bool input = true) {
    if (input) sub->add_option("input", f.input, "Problem file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", f.out, "Output file (default: stdout)");
    sub->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--p", f.p, "Transport exponent override");
    sub->add_option("--norms", f.norms, "Component norms override (L1, L2, LInf)")->delimiter(',');
    sub->add_option("--budgets", f.budgets, "Componentwise budgets override")->delimiter(',');
    sub->add_option("--cap", f.cap, "Expansion or enumeration cap");
    sub->add_option("--seed", f.seed, "Random seed")->each([&f](const std::string&) { f.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust optimization over multi-transport hyperrectangles"};
    app.require_subcommand(1);
    Flags f;
    std::string samples;
    ClusterFlags cf;
    ExperimentFlags ef;

    auto* solve = app.add_subcommand("solve", "Worst-case expectation of a PWA or quadratic objective");
    add_common(solve, f);
    auto* uq = app.add_subcommand("uq", "Worst-case probability of a union of polyhedra, or of missing an open union");
    add_common(uq, f);
    uq->add_flag("--drop-empty", f.drop_empty, "Drop pieces that miss the support");
    auto* drccp = app.add_subcommand("drccp", "Distributionally robust CVaR-constrained program");
    add_common(drccp, f);
    drccp->add_option("--samples", samples, "CSV of reference atoms (uniform weights)")->check(CLI::ExistingFile);
    auto* cluster = app.add_subcommand("cluster", "Cluster a sample CSV and report the budget inflation");
    add_common(cluster, f);
    cluster->add_option("--dims", cf.dims, "Component dimensions (default: one per column)")->delimiter(',');
    cluster->add_option("-K", cf.K, "Cluster counts per block")->delimiter(',')->required();
    cluster->add_option("--strategy", cf.strategy, "direct, componentwise or multicomponent");
    cluster->add_option("--groups", cf.groups, "Group sizes for multicomponent")->delimiter(',');
    cluster->add_flag("--exact-inflation", cf.exact, "Measure the inflation with an exact transport plan");
    auto* experiment = app.add_subcommand("experiment", "Power-dispatch confidence study");
    add_common(experiment, f, false);
    experiment->add_option("--config", ef.config, "Experiment configuration JSON")->check(CLI::ExistingFile);
    experiment->add_option("--out-dir", ef.out_dir, "Directory for confidence.csv, cdf.csv and report.json");
    experiment->add_option("--trials", ef.trials, "Monte Carlo trials");
    experiment->add_option("--rule", ef.rule, "Clustered budget rule")->check(CLI::IsMember({"enclosing", "additive"}));
    experiment->add_option("--workers", ef.workers, "Worker threads (0: automatic)");
    auto* oracle = app.add_subcommand("oracle", "Primal grid value of a problem")->group("");
    add_common(oracle, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kError;
    }
    try {
        if (solve->parsed()) return cmd_solve(f);
        if (uq->parsed()) return cmd_uq(f);
        if (drccp->parsed()) return cmd_drccp(f, samples);
        if (cluster->parsed()) return cmd_cluster(f, cf);
        if (experiment->parsed()) return cmd_experiment(f, ef);
        if (oracle->parsed()) return cmd_oracle(f);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (e.code() == ErrorCode::UnboundedValue) return kUnbounded;
        if (e.code() == ErrorCode::InfeasibleX) return kInfeasible;
        return kError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kError;
    }
    return kError;
}
