#include "mthdro/drccp.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace mthdro {

double DrccpPiece::evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xi) const {
    double v = offset + xi_slope.dot(xi) + x_slope.dot(x);
    if (A.size() > 0) v += x.dot(A * xi);
    return v;
}

double ChanceConstraint::evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xi) const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& piece : pieces) v = std::max(v, piece.evaluate(x, xi));
    return v;
}

void DrccpProblem::validate(int d) const {
    const int l = decision_dim();
    require(l >= 1, ErrorCode::InvalidArgument, "decision vector is empty");
    require(X.rows() == 0 || X.dim() == l, ErrorCode::DimensionMismatch, "X lives in the wrong dimension");
    require(support.rows() == 0 || support.dim() == d, ErrorCode::DimensionMismatch,
            "support dimension differs from the reference");
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto& c = constraints[i];
        const std::string where = "constraint " + std::to_string(i);
        require(c.alpha > 0.0 && c.alpha < 1.0, ErrorCode::InvalidArgument, where + ": alpha must lie in (0, 1)");
        require(!c.pieces.empty(), ErrorCode::InvalidArgument, where + " has no pieces");
        for (const auto& p : c.pieces) {
            require(p.A.size() == 0 || (p.A.rows() == l && p.A.cols() == d), ErrorCode::DimensionMismatch,
                    where + ": A must be l x d");
            require(p.xi_slope.size() == d && p.x_slope.size() == l, ErrorCode::DimensionMismatch,
                    where + ": slope lengths");
        }
    }
}

namespace {

struct CvarBlock {
    LinearExpr tau;
    LinearExpr budget_term;  ///< <lambda, eps> + sum_l w_l s_l
};

// Per-atom hinge constraints of one chance constraint, with x given as expressions.
CvarBlock add_cvar_block(ConicProgram& p, const MthSpec& mth, const ChanceConstraint& cc,
                         const std::vector<LinearExpr>& x, const Polyhedron& Xi) {
    const auto& ref = mth.reference();
    const auto& cs = mth.structure();
    const int d = mth.dim();
    const int r = Xi.rows();
    CvarBlock out;
    const auto tau = p.add_variables("tau", 1);
    const auto lambda = p.add_nonnegative_variables("lambda", cs.components());
    const auto s = p.add_nonnegative_variables("s", ref.size());
    out.tau = tau[0];
    const Vector eps = mth.powered_budgets();
    for (int k = 0; k < cs.components(); ++k) out.budget_term += eps(k) * lambda[k];
    for (int l = 0; l < ref.size(); ++l) out.budget_term += ref.weight(l) * s[l];
    for (int l = 0; l < ref.size(); ++l) {
        const Vector a = ref.atom(l);
        const Vector slack = r > 0 ? Vector(Xi.f - Xi.C * a) : Vector();
        for (const auto& piece : cc.pieces) {
            const auto eta = p.add_nonnegative_variables("eta", r);
            // slope of xi: A' x + xi_slope - C' eta
            std::vector<LinearExpr> v(d);
            for (int t = 0; t < d; ++t) {
                v[t] = LinearExpr(piece.xi_slope(t));
                if (piece.A.size() > 0) v[t] += dot(piece.A.col(t), x);
                for (int q = 0; q < r; ++q) {
                    if (Xi.C(q, t) != 0.0) v[t].add_term(eta.offset + q, -Xi.C(q, t));
                }
            }
            LinearExpr lhs = piece.offset + dot(piece.x_slope, x) + tau[0];
            lhs += piece.xi_slope.dot(a);
            if (piece.A.size() > 0) lhs += dot(piece.A * a, x);
            if (r > 0) lhs += dot(slack, eta.exprs());
            p.add_less_equal(lhs, s[l]);
            for (int k = 0; k < cs.components(); ++k) {
                add_dual_norm_constraint(p, {v.begin() + cs.offset(k), v.begin() + cs.offset(k) + cs.dim(k)}, lambda[k],
                                         cs.norm(k));
            }
        }
    }
    return out;
}

void check_support(const MthSpec& mth, const DrccpProblem& problem, const SolverConfig& config) {
    require(mth.p() == 1, ErrorCode::InvalidArgument, "chance-constrained reformulation requires p = 1");
    problem.validate(mth.dim());
    const auto bounds = coordinate_bounds(problem.support, config);
    require(!bounds.empty, ErrorCode::EmptySupport, "support polyhedron is empty");
    require(bounds.bounded, ErrorCode::UnboundedSupport, "support polyhedron is not bounded");
}

}  // namespace

ConicProgram build_drccp(const MthSpec& mth, const DrccpProblem& problem, const SolverConfig& config) {
    check_support(mth, problem, config);
    require(polyhedron_is_nonempty(problem.X, config), ErrorCode::InfeasibleX, "decision set X is empty");
    ConicProgram p;
    const int l = problem.decision_dim();
    const auto x = p.add_variables("x", l);
    const auto xe = x.exprs();
    for (int r = 0; r < problem.X.rows(); ++r) p.add_less_equal(dot(problem.X.C.row(r).transpose(), xe), problem.X.f(r));
    for (const auto& cc : problem.constraints) {
        const CvarBlock b = add_cvar_block(p, mth, cc, xe, problem.support);
        p.add_less_equal(b.budget_term, cc.alpha * b.tau);
    }
    p.minimize(dot(problem.g, xe));
    return p;
}

DrccpResult solve_drccp(const MthSpec& mth, const DrccpProblem& problem, const SolverConfig& config) {
    const ConicProgram program = build_drccp(mth, problem, config);
    DrccpResult out;
    out.dimensions = program.dimensions();
    out.solution = solve(program, config);
    out.status = out.solution.status;
    if (out.solution.optimal()) {
        out.value = out.solution.value;
        out.x = out.solution.group("x");
    }
    return out;
}

double worst_case_cvar(const MthSpec& mth, const DrccpProblem& problem, const Eigen::Ref<const Vector>& x,
                       int constraint, const SolverConfig& config) {
    check_support(mth, problem, config);
    require(constraint >= 0 && constraint < static_cast<int>(problem.constraints.size()), ErrorCode::InvalidArgument,
            "constraint index out of range");
    require(x.size() == problem.decision_dim(), ErrorCode::DimensionMismatch, "decision has the wrong length");
    const auto& cc = problem.constraints[constraint];
    ConicProgram p;
    std::vector<LinearExpr> xe;
    for (int i = 0; i < x.size(); ++i) xe.emplace_back(x(i));
    const CvarBlock b = add_cvar_block(p, mth, cc, xe, problem.support);
    p.minimize((1.0 / cc.alpha) * b.budget_term - b.tau);
    const Solution sol = solve(p, config);
    require(sol.optimal(), ErrorCode::SolverFailure, "worst-case CVaR program ended " + to_string(sol.status));
    return sol.value;
}

}  // namespace mthdro
