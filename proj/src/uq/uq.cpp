#include "mthdro/uq.hpp"

#include <string>

#include "mthdro/parallel.hpp"
#include "mthdro/reformulate.hpp"

namespace mthdro {

namespace {

void check_inputs(const MthSpec& mth, const Polyhedron& support, const SolverConfig& config) {
    require(mth.p() == 1, ErrorCode::InvalidArgument, "uncertainty quantification requires p = 1");
    if (support.rows() == 0) return;
    require(support.dim() == mth.dim(), ErrorCode::DimensionMismatch, "support dimension differs from the reference");
    require(polyhedron_is_nonempty(support, config), ErrorCode::EmptySupport, "support polyhedron is empty");
}

std::vector<char> intersects_support(const std::vector<Polyhedron>& pieces, const Polyhedron& support,
                                     const SolverConfig& config) {
    std::vector<char> ok(pieces.size(), 0);
    parallel_for(pieces.size(), [&](std::size_t j) { ok[j] = intersection_is_nonempty(pieces[j], support, config); });
    return ok;
}

// 1 + <theta, b - A a> + <gamma, f - C a> <= s and ||pr_k(A' theta + C' gamma)||_* <= lambda_k per piece.
ConicProgram build_closed(const MthSpec& mth, const std::vector<const Polyhedron*>& pieces, const Polyhedron& Xi) {
    const auto& cs = mth.structure();
    const int d = mth.dim();
    return build_dual_template(mth, [&](ConicProgram& p, int, const Vector& atom,
                                        const std::vector<LinearExpr>& lambda, const LinearExpr& s) {
        p.add_nonnegative(s);
        for (const Polyhedron* A : pieces) {
            const auto theta = p.add_nonnegative_variables("theta", A->rows());
            const auto gamma = p.add_nonnegative_variables("gamma", Xi.rows());
            LinearExpr lhs(1.0);
            if (A->rows() > 0) lhs += dot(Vector(A->f - A->C * atom), theta.exprs());
            if (Xi.rows() > 0) lhs += dot(Vector(Xi.f - Xi.C * atom), gamma.exprs());
            p.add_less_equal(lhs, s);
            std::vector<LinearExpr> v(d);
            for (int i = 0; i < d; ++i) {
                if (A->rows() > 0) v[i] += dot(A->C.col(i), theta.exprs());
                if (Xi.rows() > 0) v[i] += dot(Xi.C.col(i), gamma.exprs());
            }
            for (int k = 0; k < cs.components(); ++k) {
                add_dual_norm_constraint(p, {v.begin() + cs.offset(k), v.begin() + cs.offset(k) + cs.dim(k)}, lambda[k],
                                         cs.norm(k));
            }
        }
    });
}

UqResult solve_closed(const MthSpec& mth, const std::vector<const Polyhedron*>& pieces, const Polyhedron& Xi,
                      const SolverConfig& config) {
    UqResult out;
    const ConicProgram program = build_closed(mth, pieces, Xi);
    out.dimensions = program.dimensions();
    out.solution = solve(program, config);
    require(out.solution.optimal(), ErrorCode::SolverFailure,
            "worst-case probability program ended " + to_string(out.solution.status));
    out.value = out.solution.value;
    return out;
}

}  // namespace

ConicProgram build_worst_case_probability(const MthSpec& mth, const PolyUnion& pieces, const UqOptions& options,
                                          std::vector<int>* kept) {
    check_inputs(mth, pieces.support, options.solver);
    for (std::size_t j = 0; j < pieces.pieces.size(); ++j) {
        require(pieces.pieces[j].rows() == 0 || pieces.pieces[j].dim() == mth.dim(), ErrorCode::DimensionMismatch,
                "piece " + std::to_string(j) + " has the wrong dimension");
    }
    const auto ok = intersects_support(pieces.pieces, pieces.support, options.solver);
    std::vector<const Polyhedron*> use;
    std::vector<int> idx;
    for (std::size_t j = 0; j < ok.size(); ++j) {
        if (!ok[j]) {
            require(options.drop_empty, ErrorCode::EmptyIntersection,
                    "piece " + std::to_string(j) + " does not intersect the support");
            continue;
        }
        use.push_back(&pieces.pieces[j]);
        idx.push_back(static_cast<int>(j));
    }
    if (kept) *kept = idx;
    return build_closed(mth, use, pieces.support);
}

UqResult worst_case_probability(const MthSpec& mth, const PolyUnion& pieces, const UqOptions& options) {
    std::vector<int> kept;
    const ConicProgram program = build_worst_case_probability(mth, pieces, options, &kept);
    UqResult out;
    out.kept = std::move(kept);
    out.dimensions = program.dimensions();
    out.solution = solve(program, options.solver);
    require(out.solution.optimal(), ErrorCode::SolverFailure,
            "worst-case probability program ended " + to_string(out.solution.status));
    out.value = out.solution.value;
    return out;
}

UqResult worst_case_miss_probability(const MthSpec& mth, const OpenPolyUnion& pieces, const UqOptions& options) {
    check_inputs(mth, pieces.support, options.solver);
    const int m = static_cast<int>(pieces.pieces.size());
    std::size_t total = 1;
    for (int j = 0; j < m; ++j) {
        const auto& P = pieces.pieces[j];
        require(P.halfspaces() >= 1, ErrorCode::InvalidArgument, "piece " + std::to_string(j) + " has no half-spaces");
        require(P.normals.cols() == mth.dim() && P.bounds.size() == P.halfspaces(), ErrorCode::DimensionMismatch,
                "piece " + std::to_string(j) + " has inconsistent dimensions");
        total *= static_cast<std::size_t>(P.halfspaces());
        require(total <= options.enumeration_cap, ErrorCode::EnumerationCapExceeded,
                "index set exceeds the enumeration cap of " + std::to_string(options.enumeration_cap));
    }
    std::vector<std::vector<int>> tuples;
    std::vector<Polyhedron> closed;
    tuples.reserve(total);
    closed.reserve(total);
    std::vector<int> q(m, 0);
    for (std::size_t t = 0; t < total; ++t) {
        Matrix C(m, mth.dim());
        Vector f(m);
        for (int j = 0; j < m; ++j) {
            C.row(j) = -pieces.pieces[j].normals.row(q[j]);
            f(j) = -pieces.pieces[j].bounds(q[j]);
        }
        tuples.push_back(q);
        closed.emplace_back(C, f);
        for (int j = m - 1; j >= 0; --j) {
            if (++q[j] < pieces.pieces[j].halfspaces()) break;
            q[j] = 0;
        }
    }
    const auto ok = intersects_support(closed, pieces.support, options.solver);
    std::vector<const Polyhedron*> use;
    std::vector<std::vector<int>> kept_tuples;
    std::vector<int> kept;
    for (std::size_t t = 0; t < total; ++t) {
        if (!ok[t]) continue;
        use.push_back(&closed[t]);
        kept_tuples.push_back(tuples[t]);
        kept.push_back(static_cast<int>(t));
    }
    UqResult out = solve_closed(mth, use, pieces.support, options.solver);
    out.kept = std::move(kept);
    out.indices = std::move(kept_tuples);
    return out;
}

}  // namespace mthdro
