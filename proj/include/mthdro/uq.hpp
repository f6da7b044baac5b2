#pragma once

#include <cstddef>
#include <vector>

#include "mthdro/core.hpp"
#include "mthdro/program.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

/// Union of closed polyhedra A_j = {xi : A_j xi <= b_j} inside the support Xi.
struct PolyUnion {
    std::vector<Polyhedron> pieces;
    Polyhedron support;
};

/// Intersection of strict half-spaces {xi : <a, xi> < b}; rows of `normals`
/// are the a's.
struct OpenPolytope {
    Matrix normals;
    Vector bounds;
    int halfspaces() const { return static_cast<int>(normals.rows()); }
};

/// Union of open polytopes inside the support Xi.
struct OpenPolyUnion {
    std::vector<OpenPolytope> pieces;
    Polyhedron support;
};

inline constexpr std::size_t kDefaultEnumerationCap = 100'000;

struct UqOptions {
    /// Silently drop pieces that miss the support instead of raising EmptyIntersection.
    bool drop_empty = false;
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    SolverConfig solver;
};

struct UqResult {
    double value = 0.0;
    Solution solution;
    ProgramDimensions dimensions;
    std::vector<int> kept;                  ///< indices of pieces entering the program
    std::vector<std::vector<int>> indices;  ///< miss probability: the kept index tuples q
};

/// Program for sup_P P(xi in union) over T_1(Q, eps); groups lambda, s, theta, gamma.
ConicProgram build_worst_case_probability(const MthSpec& mth, const PolyUnion& pieces, const UqOptions& options,
                                          std::vector<int>* kept = nullptr);
UqResult worst_case_probability(const MthSpec& mth, const PolyUnion& pieces, const UqOptions& options = {});

/// sup_P P(xi not in union) through the closed sets B_q = {A_q xi >= b_q},
/// q ranging lexicographically over prod_j [alpha_j].
UqResult worst_case_miss_probability(const MthSpec& mth, const OpenPolyUnion& pieces, const UqOptions& options = {});

}  // namespace mthdro
