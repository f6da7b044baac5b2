#include "mthdro/program.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace mthdro {

LinearExpr LinearExpr::variable(int index, double coefficient) {
    LinearExpr e;
    e.add_term(index, coefficient);
    return e;
}

void LinearExpr::add_term(int index, double coefficient) {
    require(index >= 0, ErrorCode::InvalidArgument, "variable index must be nonnegative");
    if (coefficient != 0.0) terms_.emplace_back(index, coefficient);
}

double LinearExpr::evaluate(const Eigen::Ref<const Vector>& x) const {
    double v = constant_;
    for (const auto& [i, a] : terms_) v += a * x(i);
    return v;
}

double LinearExpr::magnitude(const Eigen::Ref<const Vector>& x) const {
    double v = std::abs(constant_);
    for (const auto& [i, a] : terms_) v += std::abs(a * x(i));
    return v;
}

int LinearExpr::max_index() const {
    int m = -1;
    for (const auto& t : terms_) m = std::max(m, t.first);
    return m;
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    constant_ += other.constant_;
    return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& other) {
    terms_.reserve(terms_.size() + other.terms_.size());
    for (const auto& [i, a] : other.terms_) terms_.emplace_back(i, -a);
    constant_ -= other.constant_;
    return *this;
}

LinearExpr& LinearExpr::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        constant_ = 0.0;
        return *this;
    }
    for (auto& t : terms_) t.second *= s;
    constant_ *= s;
    return *this;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator-(LinearExpr a) { return a *= -1.0; }
LinearExpr operator*(double s, LinearExpr a) { return a *= s; }
LinearExpr operator*(LinearExpr a, double s) { return a *= s; }

LinearExpr dot(const Eigen::Ref<const Vector>& coefficients, const std::vector<LinearExpr>& exprs) {
    require(static_cast<std::size_t>(coefficients.size()) == exprs.size(), ErrorCode::DimensionMismatch,
            "dot: length mismatch");
    LinearExpr out;
    for (std::size_t i = 0; i < exprs.size(); ++i) {
        const double a = coefficients(static_cast<Eigen::Index>(i));
        if (a == 0.0) continue;
        out += a * exprs[i];
    }
    return out;
}

std::vector<LinearExpr> VariableBlock::exprs() const {
    std::vector<LinearExpr> out;
    out.reserve(size);
    for (int i = 0; i < size; ++i) out.push_back((*this)[i]);
    return out;
}

LinearExpr VariableBlock::sum() const {
    LinearExpr out;
    for (int i = 0; i < size; ++i) out.add_term(offset + i, 1.0);
    return out;
}

int psd_lower_index(int i, int j, int dim) {
    if (i < j) std::swap(i, j);
    // Columns 0..j-1 contribute dim + (dim-1) + ... + (dim-j+1) entries.
    return j * dim - j * (j - 1) / 2 + (i - j);
}

// ---------------------------------------------------------------------------

VariableBlock ConicProgram::add_variables(const std::string& name, int count) {
    require(count >= 0, ErrorCode::InvalidArgument, "variable count must be nonnegative");
    VariableBlock block{num_variables_, count};
    auto [it, inserted] = groups_.try_emplace(name);
    if (inserted) group_order_.push_back(name);
    for (int i = 0; i < count; ++i) it->second.push_back(num_variables_ + i);
    num_variables_ += count;
    return block;
}

VariableBlock ConicProgram::add_nonnegative_variables(const std::string& name, int count) {
    VariableBlock block = add_variables(name, count);
    for (int i = 0; i < count; ++i) add_nonnegative(block[i]);
    return block;
}

void ConicProgram::check_expr(const LinearExpr& e) const {
    require(e.max_index() < num_variables_, ErrorCode::InvalidArgument,
            "expression references an undeclared variable");
    require(std::isfinite(e.constant()), ErrorCode::InvalidArgument, "expression constant is not finite");
    for (const auto& t : e.terms())
        require(std::isfinite(t.second), ErrorCode::InvalidArgument, "expression coefficient is not finite");
}

void ConicProgram::minimize(LinearExpr objective) {
    check_expr(objective);
    objective_ = std::move(objective);
    sense_ = Sense::Minimize;
}

void ConicProgram::maximize(LinearExpr objective) {
    check_expr(objective);
    objective_ = std::move(objective);
    sense_ = Sense::Maximize;
}

void ConicProgram::add_equality(LinearExpr expr) {
    check_expr(expr);
    equalities_.push_back(std::move(expr));
}

void ConicProgram::add_equality(LinearExpr lhs, const LinearExpr& rhs) { add_equality(lhs -= rhs); }

void ConicProgram::add_less_equal(LinearExpr lhs, const LinearExpr& rhs) {
    lhs -= rhs;
    check_expr(lhs);
    inequalities_.push_back(std::move(lhs));
}

void ConicProgram::add_nonnegative(const LinearExpr& expr) { add_less_equal(-expr, LinearExpr()); }

void ConicProgram::add_second_order_cone(LinearExpr t, std::vector<LinearExpr> u) {
    check_expr(t);
    for (const auto& e : u) check_expr(e);
    socs_.push_back(SocConstraint{std::move(t), std::move(u)});
}

void ConicProgram::add_psd(int dim, std::vector<LinearExpr> lower) {
    require(dim >= 1, ErrorCode::InvalidArgument, "PSD block dimension must be positive");
    require(static_cast<int>(lower.size()) == dim * (dim + 1) / 2, ErrorCode::DimensionMismatch,
            "PSD block needs dim*(dim+1)/2 lower-triangle entries");
    for (const auto& e : lower) check_expr(e);
    psds_.push_back(PsdConstraint{dim, std::move(lower)});
}

ProgramDimensions ConicProgram::dimensions() const {
    ProgramDimensions d;
    d.variables = num_variables_;
    d.equalities = static_cast<int>(equalities_.size());
    d.inequalities = static_cast<int>(inequalities_.size());
    d.soc_blocks = static_cast<int>(socs_.size());
    for (const auto& s : socs_) d.soc_rows += 1 + static_cast<int>(s.u.size());
    d.psd_blocks = static_cast<int>(psds_.size());
    for (const auto& p : psds_) d.psd_rows += p.dim * (p.dim + 1) / 2;
    return d;
}

// ---------------------------------------------------------------------------

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "?";
}

const Vector& Solution::group(const std::string& name) const {
    auto it = variables.find(name);
    if (it == variables.end()) throw Error(ErrorCode::InvalidArgument, "no variable group named '" + name + "'");
    return it->second;
}

void attach_groups(const ConicProgram& program, Solution& solution) {
    solution.variables.clear();
    if (solution.x.size() != program.num_variables()) return;
    for (const auto& [name, idx] : program.groups()) {
        Vector v(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) v(static_cast<Eigen::Index>(i)) = solution.x(idx[i]);
        solution.variables.emplace(name, std::move(v));
    }
}

Matrix evaluate_psd(const PsdConstraint& block, const Eigen::Ref<const Vector>& x) {
    Matrix m(block.dim, block.dim);
    int k = 0;
    for (int j = 0; j < block.dim; ++j)
        for (int i = j; i < block.dim; ++i) {
            m(i, j) = m(j, i) = block.lower[k++].evaluate(x);
        }
    return m;
}

void add_dual_norm_constraint(ConicProgram& program, const std::vector<LinearExpr>& v, const LinearExpr& lambda,
                              Norm norm, const std::string& aux_name) {
    require(!v.empty(), ErrorCode::InvalidArgument, "dual norm constraint needs a nonempty vector");
    if (v.size() == 1) {
        program.add_less_equal(v[0], lambda);
        program.add_less_equal(-v[0], lambda);
        return;
    }
    switch (dual_of(norm)) {
        case Norm::LInf:
            for (const auto& e : v) {
                program.add_less_equal(e, lambda);
                program.add_less_equal(-e, lambda);
            }
            break;
        case Norm::L1: {
            const VariableBlock t = program.add_variables(aux_name, static_cast<int>(v.size()));
            for (std::size_t i = 0; i < v.size(); ++i) {
                program.add_less_equal(v[i], t[static_cast<int>(i)]);
                program.add_less_equal(-v[i], t[static_cast<int>(i)]);
            }
            program.add_less_equal(t.sum(), lambda);
            break;
        }
        case Norm::L2:
            program.add_second_order_cone(lambda, v);
            break;
    }
}

}  // namespace mthdro
