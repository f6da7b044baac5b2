#include <gtest/gtest.h>

#include <random>

#include "mthdro/oracle.hpp"
#include "mthdro/reformulate.hpp"
#include "mthdro/uq.hpp"
#include "support/test_support.hpp"

using namespace mthdro;
using mthdro::testing::random_matrix;
using mthdro::testing::random_vector;

namespace {

Polyhedron interval(double lo, double hi) { return Polyhedron::box(Vector::Constant(1, lo), Vector::Constant(1, hi)); }

MthSpec dirac_1d(double a, double eps) {
    return MthSpec(DiscreteDistribution::dirac(Vector::Constant(1, a)), Vector::Constant(1, eps),
                   ComponentStructure::single(1, Norm::L1));
}

OpenPolytope strict_box(const Vector& lo, const Vector& hi) {
    const int d = static_cast<int>(lo.size());
    OpenPolytope P;
    P.normals.resize(2 * d, d);
    P.normals << Matrix::Identity(d, d), -Matrix::Identity(d, d);
    P.bounds.resize(2 * d);
    P.bounds << hi, -lo;
    return P;
}

struct RandomUnion {
    MthSpec mth;
    PolyUnion closed;
    OpenPolyUnion open;
};

RandomUnion random_union(std::mt19937_64& rng, int pieces) {
    const Matrix atoms = random_matrix(rng, 6, 2, -1, 1);
    const MthSpec mth(DiscreteDistribution::uniform(atoms), random_vector(rng, 2, 0, 0.5),
                      ComponentStructure({1, 1}, {Norm::L1, Norm::L2}));
    const Polyhedron Xi = Polyhedron::box(Vector::Constant(2, -2), Vector::Constant(2, 2));
    PolyUnion closed{{}, Xi};
    OpenPolyUnion open{{}, Xi};
    for (int j = 0; j < pieces; ++j) {
        const Vector c = random_vector(rng, 2, -1, 1);
        const Vector r = random_vector(rng, 2, 0.1, 0.6);
        closed.pieces.push_back(Polyhedron::box(c - r, c + r));
        open.pieces.push_back(strict_box(c - r, c + r));
    }
    return {mth, closed, open};
}

double frequency(const DiscreteDistribution& Q, const std::vector<Polyhedron>& pieces) {
    double v = 0;
    for (int l = 0; l < Q.size(); ++l) {
        bool in = false;
        for (const auto& A : pieces) in = in || A.contains(Q.atom(l), 0.0);
        if (in) v += Q.weight(l);
    }
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

TEST(WorstCaseProbability, FullCoverIsOne) {
    const Polyhedron Xi = interval(-10, 10);
    for (double eps : {0.0, 0.5, 3.0}) {
        EXPECT_NEAR(worst_case_probability(dirac_1d(2, eps), PolyUnion{{Xi}, Xi}).value, 1.0, 1e-7);
    }
}

TEST(WorstCaseProbability, ZeroBudgetIsReferenceFrequency) {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 5; ++t) {
        auto u = random_union(rng, 1 + t % 3);
        const MthSpec mth = u.mth.with_budgets(Vector::Zero(2));
        EXPECT_NEAR(worst_case_probability(mth, u.closed).value, frequency(mth.reference(), u.closed.pieces), 1e-6);
    }
}

TEST(WorstCaseProbability, HalfMassReachesThreshold) {
    const MthSpec mth = dirac_1d(0, 0.5);
    const Polyhedron Xi = interval(-10, 10);
    const Polyhedron A = interval(1, 10);
    const UqResult r = worst_case_probability(mth, PolyUnion{{A}, Xi});
    EXPECT_NEAR(r.value, 0.5, 1e-6);
    const double grid = primal_grid_value(
        mth, [&](const Eigen::Ref<const Vector>& xi) { return A.contains(xi, 1e-9) ? 1.0 : 0.0; },
        GridSpec{{-10}, {10}, {2001}}, Xi);
    EXPECT_NEAR(r.value, grid, 1e-4);
    EXPECT_EQ(r.kept, std::vector<int>{0});
}

TEST(WorstCaseProbability, MatchesConcaveMaxWithIndicatorPieces) {
    std::mt19937_64 rng(32);
    for (int t = 0; t < 4; ++t) {
        auto u = random_union(rng, 2);
        ConjugateOracle oracle;
        for (const auto& A : u.closed.pieces) oracle.pieces.push_back(ConjugateOracle::indicator_piece(A, 1.0));
        oracle.pieces.push_back(ConjugateOracle::affine_piece(Vector::Zero(2), 0.0));
        const double generic = solve_dro(build_dro_concave_max(u.mth, oracle, u.closed.support)).value;
        EXPECT_NEAR(worst_case_probability(u.mth, u.closed).value, generic, 1e-7);
    }
}

TEST(WorstCaseProbability, RangeAndMonotonicity) {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 5; ++t) {
        auto u = random_union(rng, 2);
        double prev = -1;
        for (double scale : {0.0, 0.25, 0.5, 1.0, 2.0}) {
            const double v = worst_case_probability(u.mth.with_budgets(scale * u.mth.budgets()), u.closed).value;
            EXPECT_GE(v, -1e-6);
            EXPECT_LE(v, 1 + 1e-6);
            EXPECT_GE(v, prev - 1e-7);
            prev = v;
        }
    }
}

TEST(WorstCaseProbability, EmptyIntersection) {
    const Polyhedron Xi = interval(-1, 1);
    const PolyUnion u{{interval(5, 6), interval(0.5, 2)}, Xi};
    EXPECT_EQ(code_of([&] { worst_case_probability(dirac_1d(0, 0.2), u); }), ErrorCode::EmptyIntersection);
    UqOptions opts;
    opts.drop_empty = true;
    const UqResult r = worst_case_probability(dirac_1d(0, 0.2), u, opts);
    EXPECT_EQ(r.kept, std::vector<int>{1});
    EXPECT_NEAR(r.value, 0.4, 1e-6);
}

TEST(WorstCaseMissProbability, CoveringPieceGivesZero) {
    const Polyhedron Xi = interval(-10, 10);
    const OpenPolyUnion u{{strict_box(Vector::Constant(1, -11), Vector::Constant(1, 11))}, Xi};
    EXPECT_NEAR(worst_case_miss_probability(dirac_1d(0, 2), u).value, 0.0, 1e-7);
}

TEST(WorstCaseMissProbability, HalfMassCrossesThreshold) {
    const Polyhedron Xi = interval(-10, 10);
    OpenPolytope below;
    below.normals = Matrix::Ones(1, 1);
    below.bounds = Vector::Ones(1);
    const UqResult r = worst_case_miss_probability(dirac_1d(0, 0.5), OpenPolyUnion{{below}, Xi});
    EXPECT_NEAR(r.value, 0.5, 1e-6);
    const double grid = primal_grid_value(
        dirac_1d(0, 0.5), [](const Eigen::Ref<const Vector>& xi) { return xi(0) < 1 ? 0.0 : 1.0; },
        GridSpec{{-10}, {10}, {2001}}, Xi);
    EXPECT_NEAR(r.value, grid, 1e-4);
}

TEST(WorstCaseMissProbability, ZeroBudgetIsEmpiricalMissFrequency) {
    std::mt19937_64 rng(34);
    for (int t = 0; t < 4; ++t) {
        auto u = random_union(rng, 2);
        const MthSpec mth = u.mth.with_budgets(Vector::Zero(2));
        const UqResult r = worst_case_miss_probability(mth, u.open);
        EXPECT_NEAR(r.value, 1.0 - frequency(mth.reference(), u.closed.pieces), 1e-6);
        for (const auto& q : r.indices) EXPECT_EQ(q.size(), 2u);
    }
}

TEST(WorstCaseMissProbability, BracketsOneWithTheClosedSets) {
    std::mt19937_64 rng(35);
    for (int t = 0; t < 5; ++t) {
        auto u = random_union(rng, 1 + t % 2);
        const double hit = worst_case_probability(u.mth, u.closed).value;
        const double miss = worst_case_miss_probability(u.mth, u.open).value;
        EXPECT_GE(hit + miss, 1 - 1e-6);
        EXPECT_LE(miss, 1 + 1e-6);
    }
}

TEST(WorstCaseMissProbability, EnumerationCap) {
    OpenPolyUnion u{{}, Polyhedron::box(Vector::Constant(2, -1), Vector::Constant(2, 1))};
    for (int j = 0; j < 5; ++j) u.pieces.push_back(strict_box(Vector::Constant(2, -0.5), Vector::Constant(2, 0.5)));
    const MthSpec mth(DiscreteDistribution::dirac(Vector::Zero(2)), Vector::Constant(1, 0.1),
                      ComponentStructure::single(2, Norm::L1));
    UqOptions opts;
    opts.enumeration_cap = 1000;
    EXPECT_EQ(code_of([&] { worst_case_miss_probability(mth, u, opts); }), ErrorCode::EnumerationCapExceeded);
    opts.enumeration_cap = 1024;
    EXPECT_NO_THROW(worst_case_miss_probability(mth, u, opts));
}
