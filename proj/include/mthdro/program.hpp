#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mthdro/core.hpp"

namespace mthdro {

/// Affine expression sum_i coef_i * x_{index_i} + constant over the flat
/// variable vector of a ConicProgram. Terms may repeat; they are summed.
class LinearExpr {
public:
    LinearExpr() = default;
    LinearExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)

    static LinearExpr variable(int index, double coefficient = 1.0);

    const std::vector<std::pair<int, double>>& terms() const { return terms_; }
    double constant() const { return constant_; }

    void add_term(int index, double coefficient);
    void add_constant(double c) { constant_ += c; }

    double evaluate(const Eigen::Ref<const Vector>& x) const;
    /// |constant| + sum |coef_i * x_i|; the reference magnitude for relative residuals.
    double magnitude(const Eigen::Ref<const Vector>& x) const;
    int max_index() const;

    LinearExpr& operator+=(const LinearExpr& other);
    LinearExpr& operator-=(const LinearExpr& other);
    LinearExpr& operator*=(double s);

private:
    std::vector<std::pair<int, double>> terms_;
    double constant_ = 0.0;
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a);
LinearExpr operator*(double s, LinearExpr a);
LinearExpr operator*(LinearExpr a, double s);

/// <coefficients, block>, the usual inner product with a variable block.
LinearExpr dot(const Eigen::Ref<const Vector>& coefficients, const std::vector<LinearExpr>& exprs);

/// A contiguous run of variables.
struct VariableBlock {
    int offset = 0;
    int size = 0;

    LinearExpr operator[](int i) const { return LinearExpr::variable(offset + i); }
    std::vector<LinearExpr> exprs() const;
    LinearExpr sum() const;
};

struct ProgramDimensions {
    int variables = 0;
    int equalities = 0;
    int inequalities = 0;
    int soc_blocks = 0;
    int soc_rows = 0;
    int psd_blocks = 0;
    int psd_rows = 0;  ///< sum of dim*(dim+1)/2 over PSD blocks
};

enum class Sense { Minimize, Maximize };

struct SocConstraint {
    LinearExpr t;
    std::vector<LinearExpr> u;  ///< ||u||_2 <= t
};

/// Symmetric dim x dim affine matrix; entries are the lower triangle in
/// column-major order: (0,0), (1,0), ..., (dim-1,0), (1,1), (2,1), ...
struct PsdConstraint {
    int dim = 0;
    std::vector<LinearExpr> lower;
};

/// Index of entry (i, j), i >= j, in the PsdConstraint::lower ordering.
int psd_lower_index(int i, int j, int dim);

/// Solver-agnostic conic program: linear objective, linear equalities and
/// inequalities, second-order cones and PSD blocks over named variable groups.
class ConicProgram {
public:
    /// Adds `count` free variables. Repeating a name appends to that group.
    VariableBlock add_variables(const std::string& name, int count);
    VariableBlock add_nonnegative_variables(const std::string& name, int count);

    void minimize(LinearExpr objective);
    void maximize(LinearExpr objective);

    /// expr == 0
    void add_equality(LinearExpr expr);
    void add_equality(LinearExpr lhs, const LinearExpr& rhs);
    /// lhs <= rhs, stored as lhs - rhs <= 0.
    void add_less_equal(LinearExpr lhs, const LinearExpr& rhs);
    /// expr >= 0
    void add_nonnegative(const LinearExpr& expr);
    /// ||u||_2 <= t
    void add_second_order_cone(LinearExpr t, std::vector<LinearExpr> u);
    void add_psd(int dim, std::vector<LinearExpr> lower);

    int num_variables() const { return num_variables_; }
    Sense sense() const { return sense_; }
    const LinearExpr& objective() const { return objective_; }
    const std::vector<LinearExpr>& equalities() const { return equalities_; }
    const std::vector<LinearExpr>& inequalities() const { return inequalities_; }
    const std::vector<SocConstraint>& second_order_cones() const { return socs_; }
    const std::vector<PsdConstraint>& psd_blocks() const { return psds_; }
    const std::map<std::string, std::vector<int>>& groups() const { return groups_; }
    /// Group names in order of first declaration.
    const std::vector<std::string>& group_order() const { return group_order_; }

    ProgramDimensions dimensions() const;

private:
    void check_expr(const LinearExpr& e) const;

    int num_variables_ = 0;
    Sense sense_ = Sense::Minimize;
    LinearExpr objective_;
    std::vector<LinearExpr> equalities_;
    std::vector<LinearExpr> inequalities_;
    std::vector<SocConstraint> socs_;
    std::vector<PsdConstraint> psds_;
    std::map<std::string, std::vector<int>> groups_;
    std::vector<std::string> group_order_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(SolveStatus status);

struct Solution {
    SolveStatus status = SolveStatus::NumericalFailure;
    double value = 0.0;       ///< objective in the program's own sense
    double dual_value = 0.0;  ///< dual objective, same sense
    Vector x;
    std::map<std::string, Vector> variables;
    Vector equality_duals;
    Vector inequality_duals;  ///< >= 0, one per inequality
    std::vector<Vector> soc_duals;
    std::vector<Matrix> psd_duals;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    std::string backend;

    bool optimal() const { return status == SolveStatus::Optimal; }
    /// Named group; throws InvalidArgument for unknown names.
    const Vector& group(const std::string& name) const;
};

/// Fills Solution::variables from the flat vector.
void attach_groups(const ConicProgram& program, Solution& solution);

/// Evaluates a symmetric PSD expression at x.
Matrix evaluate_psd(const PsdConstraint& block, const Eigen::Ref<const Vector>& x);

/// Encodes ||v||_* <= lambda, where ||.||_* is the dual of the ground norm
/// `norm`: 2|v| inequalities (L1 ground), an SOC (L2), or |v| auxiliary
/// variables named `aux_name` (LInf ground). Scalar v always gives -lambda <= v <= lambda.
void add_dual_norm_constraint(ConicProgram& program, const std::vector<LinearExpr>& v, const LinearExpr& lambda,
                              Norm norm, const std::string& aux_name = "dual_norm_aux");

}  // namespace mthdro
