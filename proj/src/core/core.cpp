#include "mthdro/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mthdro {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::CapExceeded: return "CapExceeded";
        case ErrorCode::BalanceViolation: return "BalanceViolation";
        case ErrorCode::EmptySupport: return "EmptySupport";
        case ErrorCode::UnboundedValue: return "UnboundedValue";
        case ErrorCode::NormMismatch: return "NormMismatch";
        case ErrorCode::EmptyIntersection: return "EmptyIntersection";
        case ErrorCode::EnumerationCapExceeded: return "EnumerationCapExceeded";
        case ErrorCode::UnboundedSupport: return "UnboundedSupport";
        case ErrorCode::InfeasibleX: return "InfeasibleX";
        case ErrorCode::InfeasibleGrid: return "InfeasibleGrid";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::SolverFailure: return "SolverFailure";
    }
    return "Unknown";
}

Norm dual_of(Norm norm) {
    switch (norm) {
        case Norm::L1: return Norm::LInf;
        case Norm::L2: return Norm::L2;
        case Norm::LInf: return Norm::L1;
    }
    return Norm::L2;
}

double norm_value(Norm norm, const Eigen::Ref<const Vector>& v) {
    switch (norm) {
        case Norm::L1: return v.lpNorm<1>();
        case Norm::L2: return v.norm();
        case Norm::LInf: return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

std::string to_string(Norm norm) {
    switch (norm) {
        case Norm::L1: return "L1";
        case Norm::L2: return "L2";
        case Norm::LInf: return "LInf";
    }
    return "?";
}

Norm parse_norm(const std::string& text) {
    if (text == "L1" || text == "l1" || text == "1") return Norm::L1;
    if (text == "L2" || text == "l2" || text == "2") return Norm::L2;
    if (text == "LInf" || text == "Linf" || text == "linf" || text == "inf") return Norm::LInf;
    throw Error(ErrorCode::InvalidArgument, "unknown norm '" + text + "' (expected L1, L2 or LInf)");
}

// ---------------------------------------------------------------------------

ComponentStructure::ComponentStructure(std::vector<int> dims, std::vector<Norm> norms, int p)
    : dims_(std::move(dims)), norms_(std::move(norms)), p_(p) {
    require(!dims_.empty(), ErrorCode::InvalidArgument, "component structure needs at least one component");
    require(dims_.size() == norms_.size(), ErrorCode::DimensionMismatch,
            "dims and norms must have the same length");
    require(p_ == 1 || p_ == 2, ErrorCode::InvalidArgument, "transport exponent p must be 1 or 2");
    offsets_.reserve(dims_.size());
    for (int d : dims_) {
        require(d >= 1, ErrorCode::InvalidArgument, "component dimensions must be positive");
        offsets_.push_back(total_);
        total_ += d;
    }
}

ComponentStructure ComponentStructure::single(int d, Norm norm, int p) {
    return ComponentStructure({d}, {norm}, p);
}

Vector ComponentStructure::project(int k, const Eigen::Ref<const Vector>& v) const {
    return v.segment(offsets_[k], dims_[k]);
}

double ComponentStructure::distance(int k, const Eigen::Ref<const Vector>& a,
                                    const Eigen::Ref<const Vector>& b) const {
    return norm_value(norms_[k], a.segment(offsets_[k], dims_[k]) - b.segment(offsets_[k], dims_[k]));
}

double ComponentStructure::transport_cost(const Eigen::Ref<const Vector>& a,
                                          const Eigen::Ref<const Vector>& b) const {
    double total = 0.0;
    for (int k = 0; k < components(); ++k) total += std::pow(distance(k, a, b), p_);
    return total;
}

// ---------------------------------------------------------------------------

DiscreteDistribution::DiscreteDistribution(Matrix atoms, Vector weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    require(atoms_.rows() >= 1, ErrorCode::InvalidArgument, "distribution needs at least one atom");
    require(atoms_.cols() >= 1, ErrorCode::InvalidArgument, "atoms must have positive dimension");
    require(weights_.size() == atoms_.rows(), ErrorCode::DimensionMismatch,
            "one weight per atom is required");
    require((weights_.array() >= 0.0).all(), ErrorCode::InvalidArgument, "weights must be nonnegative");
    require(std::abs(weights_.sum() - 1.0) <= 1e-12 * std::max<double>(1.0, static_cast<double>(weights_.size())),
            ErrorCode::InvalidArgument, "weights must sum to one");
    require(atoms_.allFinite(), ErrorCode::InvalidArgument, "atoms must be finite");
}

DiscreteDistribution DiscreteDistribution::uniform(Matrix atoms) {
    const auto m = atoms.rows();
    require(m >= 1, ErrorCode::InvalidArgument, "distribution needs at least one atom");
    Vector w = Vector::Constant(m, 1.0 / static_cast<double>(m));
    return DiscreteDistribution(std::move(atoms), std::move(w));
}

DiscreteDistribution DiscreteDistribution::dirac(const Vector& point) {
    return DiscreteDistribution(point.transpose(), Vector::Ones(1));
}

Vector DiscreteDistribution::mean() const { return atoms_.transpose() * weights_; }

// ---------------------------------------------------------------------------

ProductDiscreteDistribution::ProductDiscreteDistribution(std::vector<DiscreteDistribution> marginals)
    : marginals_(std::move(marginals)) {
    require(!marginals_.empty(), ErrorCode::InvalidArgument, "product needs at least one marginal");
}

int ProductDiscreteDistribution::dim() const {
    int d = 0;
    for (const auto& m : marginals_) d += m.dim();
    return d;
}

std::size_t ProductDiscreteDistribution::expanded_size() const {
    std::size_t total = 1;
    for (const auto& m : marginals_) {
        const auto sz = static_cast<std::size_t>(m.size());
        if (total > std::numeric_limits<std::size_t>::max() / sz) return std::numeric_limits<std::size_t>::max();
        total *= sz;
    }
    return total;
}

DiscreteDistribution expand_product(const ProductDiscreteDistribution& product, std::size_t cap) {
    const std::size_t total = product.expanded_size();
    if (total > cap) {
        std::ostringstream msg;
        msg << "expanded product has " << total << " atoms, cap is " << cap;
        throw Error(ErrorCode::CapExceeded, msg.str());
    }
    const int n = product.factors();
    const auto rows = static_cast<Eigen::Index>(total);
    Matrix atoms(rows, product.dim());
    Vector weights(rows);
    std::vector<int> index(n, 0);
    for (Eigen::Index r = 0; r < rows; ++r) {
        double w = 1.0;
        int col = 0;
        for (int k = 0; k < n; ++k) {
            const auto& m = product.marginal(k);
            atoms.row(r).segment(col, m.dim()) = m.atoms().row(index[k]);
            w *= m.weight(index[k]);
            col += m.dim();
        }
        weights(r) = w;
        for (int k = n - 1; k >= 0; --k) {
            if (++index[k] < product.marginal(k).size()) break;
            index[k] = 0;
        }
    }
    // Products of rounded marginal weights drift from one by a few ulps.
    weights /= weights.sum();
    return DiscreteDistribution(std::move(atoms), std::move(weights));
}

// ---------------------------------------------------------------------------

Polyhedron::Polyhedron(Matrix C_, Vector f_) : C(std::move(C_)), f(std::move(f_)) {
    require(C.rows() == f.size(), ErrorCode::DimensionMismatch, "polyhedron: C rows must match f length");
}

Polyhedron Polyhedron::whole_space(int d) { return Polyhedron(Matrix(0, d), Vector(0)); }

Polyhedron Polyhedron::box(const Vector& lower, const Vector& upper) {
    require(lower.size() == upper.size(), ErrorCode::DimensionMismatch, "box bounds differ in length");
    const auto d = lower.size();
    Matrix C = Matrix::Zero(2 * d, d);
    Vector f(2 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        C(2 * i, i) = 1.0;
        f(2 * i) = upper(i);
        C(2 * i + 1, i) = -1.0;
        f(2 * i + 1) = -lower(i);
    }
    return Polyhedron(std::move(C), std::move(f));
}

bool Polyhedron::contains(const Eigen::Ref<const Vector>& x, double tol) const {
    if (rows() == 0) return true;
    return ((C * x - f).array() <= tol).all();
}

// ---------------------------------------------------------------------------

MthSpec::MthSpec(DiscreteDistribution reference, Vector budgets, ComponentStructure structure)
    : reference_(std::move(reference)), budgets_(std::move(budgets)), structure_(std::move(structure)) {
    require(budgets_.size() == structure_.components(), ErrorCode::DimensionMismatch,
            "one budget per component is required");
    require((budgets_.array() >= 0.0).all(), ErrorCode::InvalidArgument, "budgets must be nonnegative");
    require(reference_.dim() == structure_.total_dim(), ErrorCode::DimensionMismatch,
            "reference dimension must equal the structure's total dimension");
}

MthSpec::MthSpec(const ProductDiscreteDistribution& reference, Vector budgets, ComponentStructure structure,
                 std::size_t cap)
    : MthSpec(expand_product(reference, cap), std::move(budgets), std::move(structure)) {}

Vector MthSpec::powered_budgets() const {
    return budgets_.array().pow(static_cast<double>(structure_.p())).matrix();
}

MthSpec MthSpec::with_budgets(Vector budgets) const { return MthSpec(reference_, std::move(budgets), structure_); }

// ---------------------------------------------------------------------------

PwaFunction::PwaFunction(Matrix slopes_, Vector offsets_, Combiner combiner_)
    : slopes(std::move(slopes_)), offsets(std::move(offsets_)), combiner(combiner_) {
    require(slopes.rows() >= 1, ErrorCode::InvalidArgument, "piecewise affine function needs a piece");
    require(slopes.rows() == offsets.size(), ErrorCode::DimensionMismatch, "one offset per piece is required");
    require(slopes.allFinite() && offsets.allFinite(), ErrorCode::InvalidArgument, "pieces must be finite");
}

PwaFunction PwaFunction::affine(const Vector& slope, double offset) {
    return PwaFunction(slope.transpose(), Vector::Constant(1, offset));
}

PwaFunction PwaFunction::constant(int d, double value) {
    return PwaFunction(Matrix::Zero(1, d), Vector::Constant(1, value));
}

double PwaFunction::operator()(const Eigen::Ref<const Vector>& xi) const {
    const Vector v = slopes * xi + offsets;
    return combiner == Combiner::Max ? v.maxCoeff() : v.minCoeff();
}

PwaFunction PwaFunction::shifted(double c) const {
    return PwaFunction(slopes, (offsets.array() + c).matrix(), combiner);
}

QuadraticFunction::QuadraticFunction(Matrix Q_, Vector q_) : Q(std::move(Q_)), q(std::move(q_)) {
    require(Q.rows() == Q.cols() && Q.rows() == q.size(), ErrorCode::DimensionMismatch,
            "quadratic: Q must be d x d and q of length d");
    require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()),
            ErrorCode::InvalidArgument, "quadratic: Q must be symmetric");
}

double QuadraticFunction::operator()(const Eigen::Ref<const Vector>& xi) const {
    return xi.dot(Q * xi) + 2.0 * q.dot(xi);
}

}  // namespace mthdro
