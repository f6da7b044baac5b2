#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mthdro/error.hpp"

namespace mthdro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ground norm of one uncertainty component.
enum class Norm { L1, L2, LInf };

Norm dual_of(Norm norm);
double norm_value(Norm norm, const Eigen::Ref<const Vector>& v);
std::string to_string(Norm norm);
Norm parse_norm(const std::string& text);

/// Split of R^d into consecutive blocks R^{d_1} x ... x R^{d_n}, each with its
/// own ground norm, plus the transport exponent p.
class ComponentStructure {
public:
    ComponentStructure(std::vector<int> dims, std::vector<Norm> norms, int p = 1);

    /// Single component covering all of R^d.
    static ComponentStructure single(int d, Norm norm, int p = 1);

    int components() const { return static_cast<int>(dims_.size()); }
    int total_dim() const { return total_; }
    int dim(int k) const { return dims_[k]; }
    int offset(int k) const { return offsets_[k]; }
    Norm norm(int k) const { return norms_[k]; }
    int p() const { return p_; }
    const std::vector<int>& dims() const { return dims_; }
    const std::vector<Norm>& norms() const { return norms_; }

    /// pr_k: the dims[k] coordinates of component k.
    Vector project(int k, const Eigen::Ref<const Vector>& v) const;

    /// rho_k(a_k, b_k), the ground distance inside component k.
    double distance(int k, const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;

    /// Sum over components of rho_k^p, the cost that MTH budgets act on.
    double transport_cost(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;

private:
    std::vector<int> dims_;
    std::vector<int> offsets_;
    std::vector<Norm> norms_;
    int p_;
    int total_ = 0;
};

/// Weighted atoms in R^d; atoms are stored as rows.
class DiscreteDistribution {
public:
    DiscreteDistribution(Matrix atoms, Vector weights);

    static DiscreteDistribution uniform(Matrix atoms);
    static DiscreteDistribution dirac(const Vector& point);

    int size() const { return static_cast<int>(atoms_.rows()); }
    int dim() const { return static_cast<int>(atoms_.cols()); }
    const Matrix& atoms() const { return atoms_; }
    const Vector& weights() const { return weights_; }
    Vector atom(int l) const { return atoms_.row(l).transpose(); }
    double weight(int l) const { return weights_(l); }

    Vector mean() const;

private:
    Matrix atoms_;
    Vector weights_;
};

inline constexpr std::size_t kDefaultExpansionCap = 1'000'000;

/// Product of independent marginals. Marginal k lives in R^{dim_k}; the
/// flattened distribution concatenates marginal atoms in marginal order.
class ProductDiscreteDistribution {
public:
    explicit ProductDiscreteDistribution(std::vector<DiscreteDistribution> marginals);

    int factors() const { return static_cast<int>(marginals_.size()); }
    const DiscreteDistribution& marginal(int k) const { return marginals_[k]; }
    const std::vector<DiscreteDistribution>& marginals() const { return marginals_; }
    int dim() const;
    /// Number of atoms of the expanded distribution (saturates at SIZE_MAX).
    std::size_t expanded_size() const;

private:
    std::vector<DiscreteDistribution> marginals_;
};

/// Lexicographic expansion: the last marginal index varies fastest.
DiscreteDistribution expand_product(const ProductDiscreteDistribution& product,
                                    std::size_t cap = kDefaultExpansionCap);

/// {xi : C xi <= f}. Zero rows means all of R^d.
struct Polyhedron {
    Matrix C;
    Vector f;

    Polyhedron() = default;
    Polyhedron(Matrix C_, Vector f_);

    static Polyhedron whole_space(int d);
    static Polyhedron box(const Vector& lower, const Vector& upper);

    int rows() const { return static_cast<int>(C.rows()); }
    int dim() const { return static_cast<int>(C.cols()); }
    bool contains(const Eigen::Ref<const Vector>& x, double tol = 1e-9) const;
};

/// Ambiguity set T_p(Q, eps): reference Q, componentwise budgets eps.
class MthSpec {
public:
    MthSpec(DiscreteDistribution reference, Vector budgets, ComponentStructure structure);
    MthSpec(const ProductDiscreteDistribution& reference, Vector budgets, ComponentStructure structure,
            std::size_t cap = kDefaultExpansionCap);

    const DiscreteDistribution& reference() const { return reference_; }
    const Vector& budgets() const { return budgets_; }
    const ComponentStructure& structure() const { return structure_; }
    int components() const { return structure_.components(); }
    int dim() const { return structure_.total_dim(); }
    int p() const { return structure_.p(); }

    /// (eps_1^p, ..., eps_n^p), the coefficients of lambda in every dual.
    Vector powered_budgets() const;

    MthSpec with_budgets(Vector budgets) const;

private:
    DiscreteDistribution reference_;
    Vector budgets_;
    ComponentStructure structure_;
};

/// h(xi) = max_j (or min_j) <alpha_j, xi> + b_j. Slopes are rows of `slopes`.
struct PwaFunction {
    enum class Combiner { Max, Min };

    Matrix slopes;
    Vector offsets;
    Combiner combiner = Combiner::Max;

    PwaFunction(Matrix slopes_, Vector offsets_, Combiner combiner_ = Combiner::Max);

    static PwaFunction affine(const Vector& slope, double offset);
    static PwaFunction constant(int d, double value);

    int pieces() const { return static_cast<int>(slopes.rows()); }
    int dim() const { return static_cast<int>(slopes.cols()); }
    double operator()(const Eigen::Ref<const Vector>& xi) const;
    PwaFunction shifted(double c) const;
};

/// h(xi) = xi' Q xi + 2 q' xi.
struct QuadraticFunction {
    Matrix Q;
    Vector q;

    QuadraticFunction(Matrix Q_, Vector q_);

    int dim() const { return static_cast<int>(q.size()); }
    double operator()(const Eigen::Ref<const Vector>& xi) const;
};

}  // namespace mthdro
