#pragma once

#include <vector>

#include "mthdro/core.hpp"
#include "mthdro/program.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

/// One affine-in-xi piece of a chance constraint:
/// <x, A xi> + <xi_slope, xi> + <x_slope, x> + offset.
struct DrccpPiece {
    Matrix A;        ///< l x d
    Vector xi_slope; ///< d
    Vector x_slope;  ///< l
    double offset = 0.0;

    double evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xi) const;
};

/// sup_P CVaR_alpha(max_j f_j(x, xi)) <= 0.
struct ChanceConstraint {
    double alpha = 0.1;
    std::vector<DrccpPiece> pieces;

    double evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xi) const;
};

/// min <g, x> s.t. x in X and every chance constraint, with xi supported on
/// the compact polyhedron `support`.
struct DrccpProblem {
    Vector g;
    Polyhedron X;
    std::vector<ChanceConstraint> constraints;
    Polyhedron support;

    int decision_dim() const { return static_cast<int>(g.size()); }
    void validate(int d) const;
};

/// LP (or LP + SOC for Euclidean components). Groups: x, and per constraint
/// (appended in constraint order) tau, lambda, s, eta.
ConicProgram build_drccp(const MthSpec& mth, const DrccpProblem& problem, const SolverConfig& config = {});

struct DrccpResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    double value = 0.0;
    Vector x;
    Solution solution;
    ProgramDimensions dimensions;
};

DrccpResult solve_drccp(const MthSpec& mth, const DrccpProblem& problem, const SolverConfig& config = {});

/// sup over the MTH of CVaR_alpha_i(f_i(x, xi)) at a fixed decision; <= 0
/// exactly when x satisfies constraint i.
double worst_case_cvar(const MthSpec& mth, const DrccpProblem& problem, const Eigen::Ref<const Vector>& x,
                       int constraint, const SolverConfig& config = {});

}  // namespace mthdro
