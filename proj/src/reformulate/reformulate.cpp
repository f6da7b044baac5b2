#include "mthdro/reformulate.hpp"

#include <string>

namespace mthdro {

namespace {

std::vector<LinearExpr> component_slice(const std::vector<LinearExpr>& v, const ComponentStructure& cs, int k) {
    return {v.begin() + cs.offset(k), v.begin() + cs.offset(k) + cs.dim(k)};
}

void add_component_dual_norms(ConicProgram& p, const std::vector<LinearExpr>& v, const ComponentStructure& cs,
                              const std::vector<LinearExpr>& lambda) {
    for (int k = 0; k < cs.components(); ++k) {
        add_dual_norm_constraint(p, component_slice(v, cs, k), lambda[k], cs.norm(k));
    }
}

// v - C' gamma as d expressions.
std::vector<LinearExpr> minus_ct_gamma(std::vector<LinearExpr> v, const Polyhedron& Xi, const VariableBlock& gamma) {
    for (int q = 0; q < Xi.rows(); ++q) {
        for (int i = 0; i < static_cast<int>(v.size()); ++i) {
            if (Xi.C(q, i) != 0.0) v[i].add_term(gamma.offset + q, -Xi.C(q, i));
        }
    }
    return v;
}

void check_support(const MthSpec& mth, const Polyhedron& Xi, const SolverConfig& config) {
    require(mth.p() == 1, ErrorCode::InvalidArgument, "this reformulation requires p = 1");
    if (Xi.rows() == 0) return;
    require(Xi.dim() == mth.dim(), ErrorCode::DimensionMismatch, "support dimension differs from the reference");
    require(polyhedron_is_nonempty(Xi, config), ErrorCode::EmptySupport, "support polyhedron is empty");
}

std::vector<LinearExpr> constant_exprs(const Eigen::Ref<const Vector>& v) {
    std::vector<LinearExpr> out;
    out.reserve(v.size());
    for (int i = 0; i < v.size(); ++i) out.emplace_back(v(i));
    return out;
}

}  // namespace

ConicProgram build_dual_template(const MthSpec& mth, const InnerSupEncoder& encoder) {
    ConicProgram p;
    const int n = mth.components();
    const auto& ref = mth.reference();
    const auto lambda = p.add_nonnegative_variables("lambda", n);
    const auto s = p.add_variables("s", ref.size());
    const Vector eps = mth.powered_budgets();
    LinearExpr objective;
    for (int k = 0; k < n; ++k) objective += eps(k) * lambda[k];
    for (int l = 0; l < ref.size(); ++l) objective += ref.weight(l) * s[l];
    p.minimize(objective);
    const auto lam = lambda.exprs();
    for (int l = 0; l < ref.size(); ++l) encoder(p, l, ref.atom(l), lam, s[l]);
    return p;
}

ConjugateOracle::PieceEncoder ConjugateOracle::affine_piece(const Vector& slope, double offset) {
    return [slope, offset](ConicProgram& p, const std::vector<LinearExpr>& w) {
        require(static_cast<int>(w.size()) == slope.size(), ErrorCode::DimensionMismatch, "affine piece dimension");
        for (int i = 0; i < slope.size(); ++i) p.add_equality(w[i] + slope(i));
        return LinearExpr(offset);
    };
}

ConjugateOracle::PieceEncoder ConjugateOracle::indicator_piece(const Polyhedron& A, double value) {
    return [A, value](ConicProgram& p, const std::vector<LinearExpr>& w) {
        require(A.dim() == static_cast<int>(w.size()), ErrorCode::DimensionMismatch, "indicator piece dimension");
        const auto theta = p.add_nonnegative_variables("theta", A.rows());
        for (int i = 0; i < A.dim(); ++i) {
            LinearExpr e = -w[i];
            for (int r = 0; r < A.rows(); ++r) {
                if (A.C(r, i) != 0.0) e.add_term(theta.offset + r, A.C(r, i));
            }
            p.add_equality(e);
        }
        return value + dot(A.f, theta.exprs());
    };
}

ConjugateOracle::SupportEncoder ConjugateOracle::polyhedral_support(const Polyhedron& Xi) {
    return [Xi](ConicProgram& p, const std::vector<LinearExpr>& v) {
        if (Xi.rows() == 0) {
            for (const auto& e : v) p.add_equality(e);
            return LinearExpr();
        }
        const auto gamma = p.add_nonnegative_variables("gamma", Xi.rows());
        const auto residual = minus_ct_gamma(v, Xi, gamma);
        for (const auto& e : residual) p.add_equality(e);
        return dot(Xi.f, gamma.exprs());
    };
}

ConjugateOracle ConjugateOracle::for_pwa(const PwaFunction& h) {
    require(h.combiner == PwaFunction::Combiner::Max, ErrorCode::InvalidArgument,
            "conjugate oracle needs a max of concave pieces");
    ConjugateOracle oracle;
    for (int j = 0; j < h.pieces(); ++j) oracle.pieces.push_back(affine_piece(h.slopes.row(j).transpose(), h.offsets(j)));
    return oracle;
}

ConicProgram build_dro_concave_max(const MthSpec& mth, const ConjugateOracle& oracle, const Polyhedron& Xi,
                                   const SolverConfig& config) {
    check_support(mth, Xi, config);
    require(!oracle.pieces.empty(), ErrorCode::InvalidArgument, "oracle has no pieces");
    const auto support = oracle.support ? oracle.support : ConjugateOracle::polyhedral_support(Xi);
    const auto& cs = mth.structure();
    const int d = mth.dim();
    return build_dual_template(mth, [&](ConicProgram& p, int, const Vector& atom,
                                        const std::vector<LinearExpr>& lambda, const LinearExpr& s) {
        for (const auto& piece : oracle.pieces) {
            const auto z = p.add_variables("z", d).exprs();
            const auto u = p.add_variables("upsilon", d).exprs();
            std::vector<LinearExpr> w(d);
            for (int i = 0; i < d; ++i) w[i] = z[i] - u[i];
            LinearExpr lhs = piece(p, w);
            lhs += support(p, u);
            lhs -= dot(atom, z);
            p.add_less_equal(lhs, s);
            add_component_dual_norms(p, z, cs, lambda);
        }
    });
}

ConicProgram build_dro_pwa(const MthSpec& mth, const PwaFunction& h, const Polyhedron& Xi, const SolverConfig& config) {
    check_support(mth, Xi, config);
    require(h.dim() == mth.dim(), ErrorCode::DimensionMismatch, "objective dimension differs from the reference");
    const auto& cs = mth.structure();
    const int r = Xi.rows();
    const int m = h.pieces();
    if (h.combiner == PwaFunction::Combiner::Max) {
        return build_dual_template(mth, [&](ConicProgram& p, int, const Vector& atom,
                                            const std::vector<LinearExpr>& lambda, const LinearExpr& s) {
            const Vector slack = r > 0 ? Vector(Xi.f - Xi.C * atom) : Vector();
            for (int j = 0; j < m; ++j) {
                const auto gamma = p.add_nonnegative_variables("gamma", r);
                LinearExpr lhs(h.offsets(j) + h.slopes.row(j).dot(atom.transpose()));
                if (r > 0) lhs += dot(slack, gamma.exprs());
                p.add_less_equal(lhs, s);
                add_component_dual_norms(p, minus_ct_gamma(constant_exprs(h.slopes.row(j).transpose()), Xi, gamma), cs,
                                         lambda);
            }
        });
    }
    return build_dual_template(mth, [&](ConicProgram& p, int, const Vector& atom,
                                        const std::vector<LinearExpr>& lambda, const LinearExpr& s) {
        const auto theta = p.add_nonnegative_variables("theta", m);
        p.add_equality(theta.sum(), LinearExpr(1.0));
        const auto gamma = p.add_nonnegative_variables("gamma", r);
        const Vector at_atom = h.offsets + h.slopes * atom;
        LinearExpr lhs = dot(at_atom, theta.exprs());
        if (r > 0) lhs += dot(Vector(Xi.f - Xi.C * atom), gamma.exprs());
        p.add_less_equal(lhs, s);
        std::vector<LinearExpr> v(h.dim());
        for (int i = 0; i < h.dim(); ++i) v[i] = dot(h.slopes.col(i), theta.exprs());
        add_component_dual_norms(p, minus_ct_gamma(std::move(v), Xi, gamma), cs, lambda);
    });
}

ConicProgram build_dro_quadratic(const MthSpec& mth, const QuadraticFunction& h, const QuadraticOptions& options) {
    const auto& cs = mth.structure();
    require(cs.p() == 2, ErrorCode::NormMismatch, "quadratic reformulation requires p = 2");
    for (int k = 0; k < cs.components(); ++k) {
        require(cs.norm(k) == Norm::L2, ErrorCode::NormMismatch,
                "quadratic reformulation requires Euclidean norms (component " + std::to_string(k) + ")");
    }
    const int d = mth.dim();
    require(h.dim() == d, ErrorCode::DimensionMismatch, "objective dimension differs from the reference");
    std::vector<int> comp(d);
    for (int k = 0; k < cs.components(); ++k) {
        for (int i = 0; i < cs.dim(k); ++i) comp[cs.offset(k) + i] = k;
    }
    return build_dual_template(mth, [&](ConicProgram& p, int, const Vector& atom,
                                        const std::vector<LinearExpr>& lambda, const LinearExpr& s) {
        const int D = d + 1;
        std::vector<LinearExpr> lower(D * (D + 1) / 2);
        for (int j = 0; j < d; ++j) {
            for (int i = j; i < d; ++i) {
                LinearExpr e(-h.Q(i, j));
                if (i == j) e += lambda[comp[i]];
                lower[psd_lower_index(i, j, D)] = e;
            }
            lower[psd_lower_index(d, j, D)] = h.q(j) + atom(j) * lambda[comp[j]];
        }
        LinearExpr corner = s;
        for (int i = 0; i < d; ++i) corner += atom(i) * atom(i) * lambda[comp[i]];
        lower[psd_lower_index(d, d, D)] = corner;
        p.add_psd(D, std::move(lower));
        if (options.nonnegative_epigraph) p.add_nonnegative(s);
    });
}

Solution solve_dro(const ConicProgram& program, const SolverConfig& config) {
    Solution sol = solve(program, config);
    switch (sol.status) {
        case SolveStatus::Optimal:
            return sol;
        case SolveStatus::Infeasible:
            throw Error(ErrorCode::UnboundedValue, "dual program infeasible: the worst-case value is +inf");
        case SolveStatus::Unbounded:
            throw Error(ErrorCode::EmptySupport, "dual program unbounded: no admissible distribution on the support");
        case SolveStatus::NumericalFailure:
            break;
    }
    throw Error(ErrorCode::SolverFailure, "solver did not converge after " + std::to_string(sol.iterations) +
                                              " iterations");
}

}  // namespace mthdro
