#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "mthdro/solver.hpp"

namespace mthdro {

FeasibilityReport check_feasibility(const ConicProgram& program, const Eigen::Ref<const Vector>& x) {
    require(x.size() == program.num_variables(), ErrorCode::DimensionMismatch,
            "check_feasibility: x has the wrong length");
    FeasibilityReport rep;
    auto note = [&rep](double v, const char* kind, std::size_t i) {
        if (!(v <= rep.max_violation)) {
            rep.max_violation = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
            rep.worst = std::string(kind) + " " + std::to_string(i);
        }
    };
    const auto& eqs = program.equalities();
    for (std::size_t i = 0; i < eqs.size(); ++i)
        note(std::abs(eqs[i].evaluate(x)) / (1.0 + eqs[i].magnitude(x)), "equality", i);
    const auto& ineqs = program.inequalities();
    for (std::size_t i = 0; i < ineqs.size(); ++i)
        note(std::max(0.0, ineqs[i].evaluate(x)) / (1.0 + ineqs[i].magnitude(x)), "inequality", i);
    const auto& socs = program.second_order_cones();
    for (std::size_t i = 0; i < socs.size(); ++i) {
        const double t = socs[i].t.evaluate(x);
        double mag = socs[i].t.magnitude(x);
        Vector u(static_cast<Eigen::Index>(socs[i].u.size()));
        for (std::size_t k = 0; k < socs[i].u.size(); ++k) {
            u(static_cast<Eigen::Index>(k)) = socs[i].u[k].evaluate(x);
            mag = std::max(mag, socs[i].u[k].magnitude(x));
        }
        note(std::max(0.0, u.norm() - t) / (1.0 + mag), "soc", i);
    }
    const auto& psds = program.psd_blocks();
    for (std::size_t i = 0; i < psds.size(); ++i) {
        const Matrix M = evaluate_psd(psds[i], x);
        double mag = 0.0;
        for (const auto& e : psds[i].lower) mag = std::max(mag, e.magnitude(x));
        const double emin = Eigen::SelfAdjointEigenSolver<Matrix>(M, Eigen::EigenvaluesOnly).eigenvalues()(0);
        note(std::max(0.0, -emin) / (1.0 + mag), "psd", i);
    }
    return rep;
}

namespace {

Polyhedron stack(const Polyhedron& a, const Polyhedron& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "polyhedra live in different dimensions");
    Matrix C(a.rows() + b.rows(), a.dim());
    C << a.C, b.C;
    Vector f(a.rows() + b.rows());
    f << a.f, b.f;
    return Polyhedron(std::move(C), std::move(f));
}

}  // namespace

bool polyhedron_is_nonempty(const Polyhedron& P, const SolverConfig& config) {
    if (P.rows() == 0) return true;
    // min t  s.t.  C xi - t <= f,  t >= -1: always feasible and bounded.
    ConicProgram prog;
    const VariableBlock xi = prog.add_variables("xi", P.dim());
    const VariableBlock t = prog.add_variables("t", 1);
    const double scale = 1.0 + P.f.cwiseAbs().maxCoeff();
    for (int r = 0; r < P.rows(); ++r) {
        LinearExpr row = -t[0];
        for (int j = 0; j < P.dim(); ++j)
            if (P.C(r, j) != 0.0) row += P.C(r, j) * xi[j];
        prog.add_less_equal(row, LinearExpr(P.f(r)));
    }
    prog.add_less_equal(LinearExpr(-scale), t[0]);
    prog.minimize(t[0]);
    const Solution sol = solve(prog, config);
    if (!sol.optimal()) throw Error(ErrorCode::SolverFailure, "feasibility LP failed: " + to_string(sol.status));
    return sol.value <= 1e-7 * scale;
}

bool intersection_is_nonempty(const Polyhedron& P1, const Polyhedron& P2, const SolverConfig& config) {
    return polyhedron_is_nonempty(stack(P1, P2), config);
}

BoxBounds coordinate_bounds(const Polyhedron& P, const SolverConfig& config) {
    BoxBounds out;
    const int d = P.dim();
    out.lower = Vector::Constant(d, -std::numeric_limits<double>::infinity());
    out.upper = Vector::Constant(d, std::numeric_limits<double>::infinity());
    if (!polyhedron_is_nonempty(P, config)) {
        out.empty = true;
        return out;
    }
    if (P.rows() == 0) {
        out.bounded = false;
        return out;
    }
    for (int i = 0; i < d; ++i) {
        for (int dir : {1, -1}) {
            ConicProgram prog;
            const VariableBlock xi = prog.add_variables("xi", d);
            for (int r = 0; r < P.rows(); ++r) {
                LinearExpr row;
                for (int j = 0; j < d; ++j)
                    if (P.C(r, j) != 0.0) row += P.C(r, j) * xi[j];
                prog.add_less_equal(row, LinearExpr(P.f(r)));
            }
            prog.maximize(static_cast<double>(dir) * xi[i]);
            const Solution sol = solve(prog, config);
            if (sol.status == SolveStatus::Unbounded) {
                out.bounded = false;
                continue;
            }
            if (!sol.optimal()) throw Error(ErrorCode::SolverFailure, "bounding LP failed: " + to_string(sol.status));
            if (dir > 0) {
                out.upper(i) = sol.value;
            } else {
                out.lower(i) = -sol.value;
            }
        }
    }
    return out;
}

TransportResult solve_transportation_generic(const Matrix& costs, const Vector& supply, const Vector& demand,
                                             const SolverConfig& config) {
    const auto m1 = static_cast<int>(costs.rows());
    const auto m2 = static_cast<int>(costs.cols());
    require(supply.size() == m1 && demand.size() == m2, ErrorCode::DimensionMismatch,
            "transportation: supply/demand lengths must match the cost matrix");
    ConicProgram prog;
    const VariableBlock pi = prog.add_nonnegative_variables("plan", m1 * m2);
    LinearExpr obj;
    for (int a = 0; a < m1; ++a)
        for (int b = 0; b < m2; ++b) obj.add_term(pi.offset + a * m2 + b, costs(a, b));
    prog.minimize(obj);
    for (int a = 0; a < m1; ++a) {
        LinearExpr row(-supply(a));
        for (int b = 0; b < m2; ++b) row.add_term(pi.offset + a * m2 + b, 1.0);
        prog.add_equality(row);
    }
    for (int b = 0; b < m2; ++b) {
        LinearExpr col(-demand(b));
        for (int a = 0; a < m1; ++a) col.add_term(pi.offset + a * m2 + b, 1.0);
        prog.add_equality(col);
    }
    const Solution sol = solve(prog, config);
    if (!sol.optimal()) throw Error(ErrorCode::SolverFailure, "transportation LP failed: " + to_string(sol.status));
    TransportResult out;
    out.plan = Matrix(m1, m2);
    for (int a = 0; a < m1; ++a)
        for (int b = 0; b < m2; ++b) out.plan(a, b) = std::max(0.0, sol.x(pi.offset + a * m2 + b));
    out.value = sol.value;
    return out;
}

}  // namespace mthdro
