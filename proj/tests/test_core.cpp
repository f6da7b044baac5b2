#include <gtest/gtest.h>

#include <random>

#include "mthdro/core.hpp"
#include "mthdro/program.hpp"
#include "mthdro/solver.hpp"
#include "support/test_support.hpp"

using namespace mthdro;
using mthdro::testing::random_matrix;
using mthdro::testing::random_vector;

TEST(Distribution, ValidatesWeights) {
    EXPECT_THROW(DiscreteDistribution(Matrix::Zero(2, 1), Vector::Constant(2, 0.4)), Error);
    EXPECT_THROW(DiscreteDistribution(Matrix::Zero(2, 1), Vector::Constant(3, 1.0 / 3)), Error);
    EXPECT_NO_THROW(DiscreteDistribution::uniform(Matrix::Zero(7, 2)));
}

TEST(ExpandProduct, SingleAtomMarginals) {
    const auto a = DiscreteDistribution::dirac(Vector::Constant(1, 2.0));
    const auto b = DiscreteDistribution::dirac(Vector::Constant(2, -1.0));
    const auto e = expand_product(ProductDiscreteDistribution({a, b}));
    ASSERT_EQ(e.size(), 1);
    EXPECT_EQ(e.dim(), 3);
    EXPECT_DOUBLE_EQ(e.weight(0), 1.0);
    EXPECT_DOUBLE_EQ(e.atoms()(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(e.atoms()(0, 2), -1.0);
}

TEST(ExpandProduct, UniformProductIsUniformAndLexicographic) {
    Matrix a(2, 1);
    a << 0, 1;
    Matrix b(3, 1);
    b << 10, 20, 30;
    const auto e = expand_product(
        ProductDiscreteDistribution({DiscreteDistribution::uniform(a), DiscreteDistribution::uniform(b)}));
    ASSERT_EQ(e.size(), 6);
    for (int l = 0; l < 6; ++l) EXPECT_NEAR(e.weight(l), 1.0 / 6.0, 1e-15);
    EXPECT_EQ(e.atoms()(1, 0), 0.0);
    EXPECT_EQ(e.atoms()(1, 1), 20.0);
    EXPECT_EQ(e.atoms()(3, 0), 1.0);
    EXPECT_EQ(e.atoms()(3, 1), 10.0);
}

TEST(ExpandProduct, SixSamplesInTwoComponentsGiveThirtySixAtoms) {
    std::mt19937_64 rng(1);
    const Matrix s = random_matrix(rng, 6, 2, 0, 1);
    const auto e = expand_product(ProductDiscreteDistribution(
        {DiscreteDistribution::uniform(s.col(0)), DiscreteDistribution::uniform(s.col(1))}));
    EXPECT_EQ(e.size(), 36);
}

TEST(ExpandProduct, CapIsEnforced) {
    const auto m = DiscreteDistribution::uniform(Matrix::Zero(10, 1));
    ProductDiscreteDistribution p({m, m, m});
    try {
        expand_product(p, 999);
        FAIL() << "expected CapExceeded";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CapExceeded);
    }
    EXPECT_EQ(expand_product(p, 1000).size(), 1000);
}

TEST(ExpandProduct, MarginalizingRecoversTheInputs) {
    std::mt19937_64 rng(2);
    std::vector<DiscreteDistribution> margs;
    for (int k = 0; k < 3; ++k) {
        const int mk = 2 + k;
        Vector w = random_vector(rng, mk, 0.1, 1);
        w /= w.sum();
        margs.emplace_back(random_matrix(rng, mk, 1 + k % 2, -1, 1), w);
    }
    const ProductDiscreteDistribution prod(margs);
    const auto e = expand_product(prod);
    EXPECT_NEAR(e.weights().sum(), 1.0, 1e-14);
    int col = 0;
    for (int k = 0; k < 3; ++k) {
        const auto& mk = prod.marginal(k);
        Vector acc = Vector::Zero(mk.size());
        for (int l = 0; l < e.size(); ++l) {
            for (int a = 0; a < mk.size(); ++a) {
                if ((e.atoms().row(l).segment(col, mk.dim()) - mk.atoms().row(a)).norm() == 0.0) {
                    acc(a) += e.weight(l);
                    break;
                }
            }
        }
        EXPECT_LT((acc - mk.weights()).cwiseAbs().maxCoeff(), 1e-14);
        col += mk.dim();
    }
}

TEST(ComponentStructure, ProjectionsAndCosts) {
    ComponentStructure cs({2, 1}, {Norm::L2, Norm::L1}, 1);
    EXPECT_EQ(cs.total_dim(), 3);
    EXPECT_EQ(cs.offset(1), 2);
    Vector a(3), b(3);
    a << 0, 0, 0;
    b << 3, 4, -2;
    EXPECT_DOUBLE_EQ(cs.distance(0, a, b), 5.0);
    EXPECT_DOUBLE_EQ(cs.distance(1, a, b), 2.0);
    EXPECT_DOUBLE_EQ(cs.transport_cost(a, b), 7.0);
    EXPECT_THROW(ComponentStructure({1}, {Norm::L1}, 3), Error);
}

TEST(MthSpec, PoweredBudgets) {
    const auto ref = DiscreteDistribution::dirac(Vector::Zero(2));
    MthSpec spec(ref, Vector::Constant(2, 0.5), ComponentStructure({1, 1}, {Norm::L2, Norm::L2}, 2));
    EXPECT_DOUBLE_EQ(spec.powered_budgets()(0), 0.25);
    EXPECT_THROW(MthSpec(ref, Vector::Constant(1, 0.5), ComponentStructure({1, 1}, {Norm::L2, Norm::L2})), Error);
    EXPECT_THROW(MthSpec(ref, Vector::Constant(2, -0.5), ComponentStructure({1, 1}, {Norm::L2, Norm::L2})), Error);
}

TEST(Functions, PwaAndQuadraticEvaluation) {
    Matrix A(2, 1);
    A << 1, -1;
    PwaFunction absval(A, Vector::Zero(2));
    EXPECT_DOUBLE_EQ(absval(Vector::Constant(1, -3.0)), 3.0);
    PwaFunction negabs(A, Vector::Zero(2), PwaFunction::Combiner::Min);
    EXPECT_DOUBLE_EQ(negabs(Vector::Constant(1, -3.0)), -3.0);
    QuadraticFunction q(Matrix::Identity(2, 2), Vector::Ones(2));
    EXPECT_DOUBLE_EQ(q(Vector::Ones(2)), 6.0);
    Matrix asym(2, 2);
    asym << 0, 1, 0, 0;
    EXPECT_THROW(QuadraticFunction(asym, Vector::Zero(2)), Error);
}

TEST(Program, PsdLowerIndexing) {
    EXPECT_EQ(psd_lower_index(0, 0, 3), 0);
    EXPECT_EQ(psd_lower_index(2, 0, 3), 2);
    EXPECT_EQ(psd_lower_index(1, 1, 3), 3);
    EXPECT_EQ(psd_lower_index(2, 2, 3), 5);
    EXPECT_EQ(psd_lower_index(0, 2, 3), 2);
}

TEST(Program, RepeatedGroupNamesAppend) {
    ConicProgram p;
    p.add_variables("a", 2);
    p.add_variables("b", 1);
    p.add_variables("a", 1);
    EXPECT_EQ(p.groups().at("a").size(), 3u);
    EXPECT_EQ(p.groups().at("a")[2], 3);
    EXPECT_THROW(p.add_equality(LinearExpr::variable(4)), Error);
}

namespace {

// min lambda s.t. ||v||_* <= lambda for constant v: the optimum is the dual norm.
double encoded_dual_norm(const Vector& v, Norm norm) {
    ConicProgram p;
    auto lam = p.add_variables("lambda", 1);
    std::vector<LinearExpr> ve;
    for (int i = 0; i < v.size(); ++i) ve.emplace_back(v(i));
    add_dual_norm_constraint(p, ve, lam[0], norm);
    p.minimize(lam[0]);
    const Solution s = solve(p, mthdro::testing::tight_config());
    EXPECT_EQ(s.status, SolveStatus::Optimal);
    return s.value;
}

bool feasible_at(const Vector& v, double lambda, Norm norm) {
    ConicProgram p;
    auto aux_free = p.add_variables("lambda", 1);
    std::vector<LinearExpr> ve;
    for (int i = 0; i < v.size(); ++i) ve.emplace_back(v(i));
    add_dual_norm_constraint(p, ve, LinearExpr(lambda), norm);
    p.add_equality(aux_free[0]);
    p.minimize(LinearExpr());
    return solve(p, mthdro::testing::tight_config()).status == SolveStatus::Optimal;
}

}  // namespace

TEST(DualNorm, ScalarCaseIsTwoInequalities) {
    for (Norm n : {Norm::L1, Norm::L2, Norm::LInf}) {
        ConicProgram p;
        auto lam = p.add_variables("lambda", 1);
        add_dual_norm_constraint(p, {LinearExpr(-1.5)}, lam[0], n);
        EXPECT_EQ(p.inequalities().size(), 2u);
        EXPECT_TRUE(p.second_order_cones().empty());
    }
}

TEST(DualNorm, EncodingSizes) {
    std::vector<LinearExpr> v{LinearExpr(1.0), LinearExpr(-2.0), LinearExpr(0.5)};
    ConicProgram a;
    add_dual_norm_constraint(a, v, a.add_variables("l", 1)[0], Norm::L1);
    EXPECT_EQ(a.inequalities().size(), 6u);
    ConicProgram b;
    add_dual_norm_constraint(b, v, b.add_variables("l", 1)[0], Norm::LInf);
    EXPECT_EQ(b.num_variables(), 4);
    ConicProgram c;
    add_dual_norm_constraint(c, v, c.add_variables("l", 1)[0], Norm::L2);
    EXPECT_EQ(c.second_order_cones().size(), 1u);
}

TEST(DualNorm, BoundaryExamples) {
    Vector v(2);
    v << 1, -2;
    EXPECT_TRUE(feasible_at(v, 2.0 + 1e-9, Norm::L1));
    EXPECT_NEAR(encoded_dual_norm(v, Norm::L1), 2.0, 1e-9);
    v << 3, 4;
    EXPECT_NEAR(encoded_dual_norm(v, Norm::L2), 5.0, 1e-9);
}

TEST(DualNorm, RandomizedAgreementWithDirectEvaluation) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 60; ++rep) {
        const Norm norm = static_cast<Norm>(rep % 3);
        const Vector v = random_vector(rng, 1 + rep % 4, -3, 3);
        const double direct = norm_value(dual_of(norm), v);
        EXPECT_NEAR(encoded_dual_norm(v, norm), direct, 1e-9 * (1 + direct)) << rep;
        EXPECT_TRUE(feasible_at(v, direct + 1e-9, norm)) << rep;
        EXPECT_FALSE(feasible_at(v, direct - 1e-3, norm)) << rep;
    }
}
