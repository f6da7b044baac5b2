#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mthdro/drccp.hpp"
#include "mthdro/oracle.hpp"
#include "support/test_support.hpp"

using namespace mthdro;
using mthdro::testing::random_matrix;
using mthdro::testing::random_vector;

namespace {

Polyhedron nonnegative(int l) { return Polyhedron(-Matrix::Identity(l, l), Vector::Zero(l)); }

Polyhedron unit_box(int d, double r) { return Polyhedron::box(Vector::Constant(d, -r), Vector::Constant(d, r)); }

DrccpPiece affine_piece(const Vector& xi_slope, const Vector& x_slope, double offset, Matrix A = {}) {
    DrccpPiece p;
    p.A = std::move(A);
    p.xi_slope = xi_slope;
    p.x_slope = x_slope;
    p.offset = offset;
    return p;
}

// Demand d + xi_2 - xi_1 must be covered by x >= 0.
DrccpProblem dispatch(double d, double alpha, const Polyhedron& support) {
    DrccpProblem pr;
    pr.g = Vector::Ones(1);
    pr.X = nonnegative(1);
    pr.support = support;
    pr.constraints.push_back({alpha, {affine_piece(Vector((Vector(2) << -1, 1).finished()), -Vector::Ones(1), d)}});
    return pr;
}

struct Instance {
    MthSpec mth;
    DrccpProblem problem;
};

// Random feasible instance: l = 2 decisions in [0, 10]^2, d = 2, pieces
// e_j - <w_j, x> + <c_j, xi> + <x, A_j xi> with w_j > 0 and small A_j.
Instance random_instance(std::mt19937_64& rng, int d = 2, int M = 6) {
    const int l = 2;
    const ComponentStructure cs = d == 2 ? ComponentStructure({1, 1}, {Norm::L1, Norm::L2})
                                         : ComponentStructure::single(1, Norm::L1);
    const MthSpec mth(DiscreteDistribution::uniform(random_matrix(rng, M, d, -1, 1)), random_vector(rng, cs.components(), 0, 0.4),
                      cs);
    DrccpProblem pr;
    pr.g = random_vector(rng, l, 0.5, 2);
    pr.X = Polyhedron::box(Vector::Zero(l), Vector::Constant(l, 10));
    pr.support = unit_box(d, 1.5);
    std::uniform_real_distribution<double> U(0, 1);
    ChanceConstraint cc;
    cc.alpha = 0.1 + 0.4 * U(rng);
    for (int j = 0; j < 2; ++j) {
        cc.pieces.push_back(affine_piece(random_vector(rng, d, -1, 1), -random_vector(rng, l, 0.5, 1.5),
                                         1 + 2 * U(rng), random_matrix(rng, l, d, -0.1, 0.1)));
    }
    pr.constraints.push_back(cc);
    return {mth, pr};
}

Vector loss_samples(const DiscreteDistribution& Q, const ChanceConstraint& cc, const Vector& x) {
    Vector v(Q.size());
    for (int i = 0; i < Q.size(); ++i) v(i) = cc.evaluate(x, Q.atom(i));
    return v;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Drccp, DeterministicConstraintIgnoresBudgetAndLevel) {
    for (double eps : {0.0, 0.7}) {
        for (double alpha : {0.05, 0.5}) {
            const MthSpec mth(DiscreteDistribution::uniform(Matrix::Identity(2, 1)), Vector::Constant(1, eps),
                              ComponentStructure::single(1, Norm::L1));
            DrccpProblem pr;
            pr.g = Vector::Ones(1);
            pr.X = nonnegative(1);
            pr.support = unit_box(1, 2);
            pr.constraints.push_back({alpha, {affine_piece(Vector::Zero(1), -Vector::Ones(1), 2.0)}});
            const DrccpResult r = solve_drccp(mth, pr);
            ASSERT_TRUE(r.solution.optimal());
            EXPECT_NEAR(r.value, 2.0, 1e-7);
            EXPECT_NEAR(worst_case_cvar(mth, pr, Vector::Constant(1, 3.0), 0), -1.0, 1e-7);
        }
    }
}

TEST(Drccp, ZeroBudgetMatchesSampleCvarProgram) {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 8; ++t) {
        auto inst = random_instance(rng);
        const MthSpec mth = inst.mth.with_budgets(Vector::Zero(2));
        const DrccpResult r = solve_drccp(mth, inst.problem);
        const auto saa = mthdro::testing::saa_cvar_program(mth.reference(), inst.problem);
        ASSERT_TRUE(r.solution.optimal());
        ASSERT_EQ(saa.status, SolveStatus::Optimal);
        EXPECT_NEAR(r.value, saa.value, 1e-6 * std::max(1.0, std::abs(saa.value)));
    }
}

TEST(Drccp, WorstCaseCvarAtZeroBudgetIsEmpiricalCvar) {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 8; ++t) {
        auto inst = random_instance(rng);
        const MthSpec mth = inst.mth.with_budgets(Vector::Zero(2));
        const Vector x = random_vector(rng, 2, 0, 3);
        const auto& cc = inst.problem.constraints[0];
        const double expected = empirical_cvar(loss_samples(mth.reference(), cc, x), mth.reference().weights(), cc.alpha);
        EXPECT_NEAR(worst_case_cvar(mth, inst.problem, x, 0), expected, 1e-7);
    }
}

TEST(Drccp, WorstCaseCvarOfAConstant) {
    std::mt19937_64 rng(43);
    const MthSpec mth(DiscreteDistribution::uniform(random_matrix(rng, 4, 2, -1, 1)),
                      Vector::Constant(2, 0.5), ComponentStructure({1, 1}, {Norm::L1, Norm::L1}));
    DrccpProblem pr;
    pr.g = Vector::Ones(1);
    pr.support = unit_box(2, 2);
    pr.constraints.push_back({0.2, {affine_piece(Vector::Zero(2), Vector::Zero(1), -0.37)}});
    EXPECT_NEAR(worst_case_cvar(mth, pr, Vector::Zero(1), 0), -0.37, 1e-7);
}

TEST(Drccp, MinMaxAgreesWithTauGrid) {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 4; ++t) {
        auto inst = random_instance(rng, 1, 5);
        const Vector x = random_vector(rng, 2, 0, 2);
        const double wc = worst_case_cvar(inst.mth, inst.problem, x, 0);
        const double grid = mthdro::testing::cvar_by_tau_grid(inst.mth, inst.problem.constraints[0], x,
                                                              inst.problem.support, -8, 8, 1e-3);
        EXPECT_NEAR(wc, grid, 1e-3);
        EXPECT_LE(wc, grid + 1e-7);
    }
}

TEST(Drccp, FeasibleSetShrinksWithBudget) {
    std::mt19937_64 rng(45);
    for (int t = 0; t < 6; ++t) {
        auto inst = random_instance(rng);
        double prev = -1e300;
        for (double scale : {0.0, 0.5, 1.0, 1.5}) {
            const MthSpec mth = inst.mth.with_budgets(scale * inst.mth.budgets());
            const DrccpResult r = solve_drccp(mth, inst.problem);
            ASSERT_TRUE(r.solution.optimal());
            EXPECT_GE(r.value, prev - 1e-7);
            prev = r.value;
            if (scale > 0) {
                const MthSpec smaller = inst.mth.with_budgets(0.5 * scale * inst.mth.budgets());
                EXPECT_LE(worst_case_cvar(smaller, inst.problem, r.x, 0), 1e-6);
            }
        }
    }
}

TEST(Drccp, WorstCaseCvarMonotoneInEachBudget) {
    std::mt19937_64 rng(46);
    for (int t = 0; t < 5; ++t) {
        auto inst = random_instance(rng);
        const Vector x = random_vector(rng, 2, 0, 2);
        for (int k = 0; k < 2; ++k) {
            Vector bigger = inst.mth.budgets();
            bigger(k) += 0.3;
            EXPECT_LE(worst_case_cvar(inst.mth, inst.problem, x, 0),
                      worst_case_cvar(inst.mth.with_budgets(bigger), inst.problem, x, 0) + 1e-8);
        }
    }
}

TEST(Drccp, PowerDispatchProgramShape) {
    std::mt19937_64 rng(47);
    const int N = 7;
    Matrix atoms(N, 2);
    atoms.col(0) = random_vector(rng, N, 11, 27);
    atoms.col(1) = random_vector(rng, N, 3, 11);
    const Polyhedron support = Polyhedron::box((Vector(2) << 11, 3).finished(), (Vector(2) << 27, 11).finished());
    const DrccpProblem pr = dispatch(4.5, 0.2, support);
    const MthSpec mth(DiscreteDistribution::uniform(atoms), Vector::Zero(2),
                      ComponentStructure({1, 1}, {Norm::L1, Norm::L1}));
    const ConicProgram prog = build_drccp(mth, pr);
    EXPECT_EQ(prog.groups().at("x").size(), 1u);
    EXPECT_EQ(prog.groups().at("tau").size(), 1u);
    EXPECT_EQ(prog.groups().at("lambda").size(), 2u);
    EXPECT_EQ(prog.groups().at("s").size(), static_cast<std::size_t>(N));
    EXPECT_EQ(prog.groups().at("eta").size(), static_cast<std::size_t>(4 * N));
    EXPECT_EQ(prog.dimensions().soc_blocks, 0);
    EXPECT_EQ(prog.dimensions().psd_blocks, 0);
    const Vector losses = atoms.col(1) - atoms.col(0);
    const DrccpResult r = solve_drccp(mth, pr);
    EXPECT_NEAR(r.value, std::max(0.0, 4.5 + empirical_cvar(losses, 0.2)), 1e-6);
    const DrccpResult high = solve_drccp(mth, dispatch(20, 0.2, support));
    EXPECT_NEAR(high.value, 20 + empirical_cvar(losses, 0.2), 1e-6);
}

TEST(Drccp, SupportAndDecisionSetErrors) {
    const MthSpec mth(DiscreteDistribution::dirac(Vector::Zero(2)), Vector::Constant(2, 0.1),
                      ComponentStructure({1, 1}, {Norm::L1, Norm::L1}));
    EXPECT_EQ(code_of([&] { build_drccp(mth, dispatch(1, 0.2, Polyhedron::whole_space(2))); }),
              ErrorCode::UnboundedSupport);
    DrccpProblem pr = dispatch(1, 0.2, unit_box(2, 1));
    Matrix C(2, 1);
    C << 1, -1;
    pr.X = Polyhedron(C, Vector::Constant(2, -1));
    EXPECT_EQ(code_of([&] { build_drccp(mth, pr); }), ErrorCode::InfeasibleX);
    pr = dispatch(1, 1.5, unit_box(2, 1));
    EXPECT_EQ(code_of([&] { build_drccp(mth, pr); }), ErrorCode::InvalidArgument);
}

TEST(Drccp, ChanceConstraintHoldsUnderTheTrueDistribution) {
    std::mt19937_64 rng(48);
    const int N = 30;
    const Polyhedron support = Polyhedron::box((Vector(2) << 0, 0).finished(), (Vector(2) << 4, 4).finished());
    Matrix atoms(N, 2);
    atoms.col(0) = random_vector(rng, N, 0, 4);
    atoms.col(1) = random_vector(rng, N, 0, 4);
    const MthSpec mth(DiscreteDistribution::uniform(atoms), Vector::Constant(2, 0.8),
                      ComponentStructure({1, 1}, {Norm::L1, Norm::L1}));
    const DrccpProblem pr = dispatch(1.0, 0.1, support);
    const DrccpResult r = solve_drccp(mth, pr);
    ASSERT_TRUE(r.solution.optimal());
    const int S = 1'000'000;
    std::uniform_real_distribution<double> U(0, 4);
    long ok = 0;
    for (int i = 0; i < S; ++i) {
        const Vector xi = (Vector(2) << U(rng), U(rng)).finished();
        if (pr.constraints[0].evaluate(r.x, xi) <= 0) ++ok;
    }
    const double p = static_cast<double>(ok) / S;
    EXPECT_GE(p, 0.9 - 3 * std::sqrt(0.09 / S));
}

TEST(Drccp, RectangleCvarBelowBallCvar) {
    std::mt19937_64 rng(49);
    for (int t = 0; t < 5; ++t) {
        auto inst = random_instance(rng);
        const ComponentStructure one = ComponentStructure::single(2, Norm::L2);
        const MthSpec rect(inst.mth.reference(), inst.mth.budgets(), ComponentStructure({1, 1}, {Norm::L2, Norm::L2}));
        const MthSpec ball(inst.mth.reference(), Vector::Constant(1, inst.mth.budgets().sum()), one);
        const Vector x = random_vector(rng, 2, 0, 2);
        EXPECT_LE(worst_case_cvar(rect, inst.problem, x, 0), worst_case_cvar(ball, inst.problem, x, 0) + 1e-8);
    }
}
