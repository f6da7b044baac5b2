#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mthdro/core.hpp"

namespace mthdro {

/// Tensor grid: coordinate i takes count[i] equispaced values in [lo[i], hi[i]].
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> count;

    int dim() const { return static_cast<int>(count.size()); }
    void validate() const;
    /// Grid points as rows, last coordinate fastest; points outside Xi dropped.
    Matrix points(const Polyhedron& Xi = {}) const;
};

inline constexpr std::size_t kGridVariableCap = 1'000'000;

using Objective = std::function<double(const Eigen::Ref<const Vector>&)>;

struct GridValue {
    double value = 0.0;
    Matrix coupling;  ///< M x |G| optimal plan
    Matrix points;    ///< the surviving grid points
    int iterations = 0;
};

/// Worst-case expectation over distributions supported on the given points:
/// max sum pi_lg h(g) s.t. sum_g pi_lg = w_l and per-component transport
/// costs <= eps_k^p. Solved by a dense two-phase revised simplex.
GridValue primal_points_value(const MthSpec& mth, const Objective& h, const Matrix& points);

/// primal_points_value on grid.points(Xi). InfeasibleGrid when no point
/// survives clipping or no coupling meets the budgets.
double primal_grid_value(const MthSpec& mth, const Objective& h, const GridSpec& grid, const Polyhedron& Xi = {});

/// CVaR at tail mass alpha: the average of the largest alpha mass of the
/// samples, splitting the boundary atom. Equals inf_tau { E[(X + tau)_+] / alpha - tau }.
double empirical_cvar(const Eigen::Ref<const Vector>& samples, double alpha);
double empirical_cvar(const Eigen::Ref<const Vector>& samples, const Eigen::Ref<const Vector>& weights, double alpha);

}  // namespace mthdro
