#pragma once

#include <memory>
#include <string>

#include "mthdro/program.hpp"

namespace mthdro {

struct SolverConfig {
    int max_iterations = 200;
    double gap_tolerance = 1e-8;
    double feasibility_tolerance = 1e-8;
    double static_regularization = 1e-9;
    int refinement_steps = 10;
    int equilibration_passes = 15;
    /// Iterates that stall but meet the tolerances inflated by this factor
    /// are still reported Optimal.
    double reduced_accuracy_factor = 100.0;

    void validate() const;
};

/// Anything that maps a ConicProgram to a Solution.
class ConicBackend {
public:
    virtual ~ConicBackend() = default;
    virtual Solution solve(const ConicProgram& program, const SolverConfig& config) const = 0;
    virtual std::string name() const = 0;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling for
/// nonnegative, second-order and PSD cones.
class InteriorPointBackend final : public ConicBackend {
public:
    Solution solve(const ConicProgram& program, const SolverConfig& config) const override;
    std::string name() const override { return "hsd-ipm"; }
};

/// Process-wide backend used by solve(); the interior-point method unless replaced.
std::shared_ptr<const ConicBackend> default_backend();
void set_default_backend(std::shared_ptr<const ConicBackend> backend);

Solution solve(const ConicProgram& program, const SolverConfig& config = {});

/// Re-evaluates every constraint at x. Violations are relative: each residual
/// is divided by 1 + the magnitude of the terms that produced it.
struct FeasibilityReport {
    double max_violation = 0.0;
    std::string worst;  ///< e.g. "inequality 12"
    bool ok(double tol) const { return max_violation <= tol; }
};

FeasibilityReport check_feasibility(const ConicProgram& program, const Eigen::Ref<const Vector>& x);

/// Coordinate bounds of a polyhedron from 2d linear programs.
struct BoxBounds {
    bool empty = false;
    bool bounded = true;
    Vector lower;
    Vector upper;
};

bool polyhedron_is_nonempty(const Polyhedron& P, const SolverConfig& config = {});
/// Nonemptiness of {x : C1 x <= f1, C2 x <= f2}.
bool intersection_is_nonempty(const Polyhedron& P1, const Polyhedron& P2, const SolverConfig& config = {});
BoxBounds coordinate_bounds(const Polyhedron& P, const SolverConfig& config = {});

struct TransportResult {
    double value = 0.0;
    Matrix plan;
};

/// Balanced transportation problem min <costs, plan> with row sums `supply`
/// and column sums `demand`, by the transportation simplex (spanning-tree
/// bases with u/v potentials).
TransportResult solve_lp_transportation(const Matrix& costs, const Vector& supply, const Vector& demand);

/// Same problem through the generic conic backend; used as a cross-check.
TransportResult solve_transportation_generic(const Matrix& costs, const Vector& supply, const Vector& demand,
                                             const SolverConfig& config = {});

}  // namespace mthdro
