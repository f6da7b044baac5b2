#pragma once

#include <functional>
#include <vector>

#include "mthdro/core.hpp"
#include "mthdro/program.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

/// Encodes sup_xi { h(xi) - sum_k lambda_k rho_k(xi_k, atom_k)^p } <= s for
/// one reference atom by adding constraints to the program.
using InnerSupEncoder = std::function<void(ConicProgram& program, int atom_index, const Vector& atom,
                                           const std::vector<LinearExpr>& lambda, const LinearExpr& s)>;

/// min <lambda, eps^p> + sum_l w_l s_l over lambda >= 0 (group "lambda") and
/// free s (group "s"), with the per-atom constraints supplied by the encoder.
ConicProgram build_dual_template(const MthSpec& mth, const InnerSupEncoder& encoder);

/// Conic encoders for the conjugates of the pieces of a concave-max objective
/// h = max_j h_j and for the support function of Xi.
struct ConjugateOracle {
    /// Adds constraints and returns an expression e such that the constraints
    /// admit e = t exactly when t >= [-h_j]^*(w).
    using PieceEncoder = std::function<LinearExpr(ConicProgram& program, const std::vector<LinearExpr>& w)>;
    /// Same contract for sigma_Xi(v).
    using SupportEncoder = std::function<LinearExpr(ConicProgram& program, const std::vector<LinearExpr>& v)>;

    std::vector<PieceEncoder> pieces;
    /// Optional; build_dro_concave_max falls back to the polyhedral support of Xi.
    SupportEncoder support;

    /// h_j(xi) = <slope, xi> + offset; [-h_j]^*(w) = offset if w = -slope, +inf otherwise.
    static PieceEncoder affine_piece(const Vector& slope, double offset);
    /// h_j = value on A and -inf outside; [-h_j]^*(w) = value + sigma_A(w).
    static PieceEncoder indicator_piece(const Polyhedron& A, double value);
    /// sigma(v) = min { <gamma, f> : C' gamma = v, gamma >= 0 }.
    static SupportEncoder polyhedral_support(const Polyhedron& Xi);
    /// One affine piece per row of a Max-combined PWA function.
    static ConjugateOracle for_pwa(const PwaFunction& h);
};

/// Concave-max objective h = max_j h_j over Xi (p = 1). Groups: lambda, s, z,
/// upsilon, plus whatever the encoders introduce.
ConicProgram build_dro_concave_max(const MthSpec& mth, const ConjugateOracle& oracle, const Polyhedron& Xi,
                                   const SolverConfig& config = {});

/// Piecewise affine objective over polyhedral Xi (p = 1). Max combiner uses
/// groups lambda, s, gamma; Min combiner adds theta in the simplex per atom.
ConicProgram build_dro_pwa(const MthSpec& mth, const PwaFunction& h, const Polyhedron& Xi,
                           const SolverConfig& config = {});

struct QuadraticOptions {
    /// Adds s_l >= 0. Exact only when every inner sup is nonnegative.
    bool nonnegative_epigraph = false;
};

/// Indefinite quadratic objective over R^d with p = 2 and Euclidean component
/// norms: one (d+1)x(d+1) PSD block per atom.
ConicProgram build_dro_quadratic(const MthSpec& mth, const QuadraticFunction& h, const QuadraticOptions& options = {});

/// Solves a builder's program. An infeasible dual means the worst case is
/// +inf (UnboundedValue); NumericalFailure raises SolverFailure.
Solution solve_dro(const ConicProgram& program, const SolverConfig& config = {});

}  // namespace mthdro
