#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mthdro::detail {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Product cone R_+^l x Q^{q_1} x ... x S_+^{s_1} x ...; PSD blocks are stored
/// in svec form (lower triangle, column-major, off-diagonals scaled by sqrt 2).
struct ConeLayout {
    int l = 0;
    std::vector<int> q;
    std::vector<int> s;

    int dim() const;
    /// Barrier degree: one per orthant entry and SOC, dim per PSD block.
    int degree() const;
    int soc_offset(int i) const;
    int psd_offset(int i) const;
    static int svec_size(int n) { return n * (n + 1) / 2; }
};

Vector svec(const Matrix& m);
Matrix smat(const Eigen::Ref<const Vector>& v, int n);

Vector identity(const ConeLayout& cones);
/// Jordan product u o v.
Vector jordan_product(const ConeLayout& cones, const Vector& u, const Vector& v);
/// Solves lambda o x = v. PSD parts of lambda must be diagonal (as the NT
/// scaling point always is).
Vector jordan_divide(const ConeLayout& cones, const Vector& lambda, const Vector& v);
/// Largest alpha with lambda + alpha * d in the cone (infinity if unbounded);
/// lambda interior, PSD parts diagonal.
double max_step(const ConeLayout& cones, const Vector& lambda, const Vector& d);
/// Largest alpha with u + alpha * d in the cone for a general interior u.
double max_step_general(const ConeLayout& cones, const Vector& u, const Vector& d);
/// r shifted along e so that it lies strictly inside the cone.
Vector bring_to_cone(const ConeLayout& cones, const Vector& r);
/// Smallest "eigenvalue" per block (x_i, t - ||u||, lambda_min); negative
/// means outside the cone.
double cone_margin(const ConeLayout& cones, const Vector& u);

/// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
class NtScaling {
public:
    /// Returns false if s or z is not strictly interior.
    bool update(const ConeLayout& cones, const Vector& s, const Vector& z);
    void set_identity(const ConeLayout& cones);

    const Vector& lambda() const { return lambda_; }
    Vector apply_W(const Vector& v) const;
    Vector apply_Wt(const Vector& v) const;
    Vector apply_Winv(const Vector& v) const;
    Vector apply_WinvT(const Vector& v) const;

    /// Diagonal of W'W on the orthant part.
    const Vector& orthant_wtw() const { return w2_; }
    /// Dense W'W for the k-th non-orthant block (SOCs first, then PSDs).
    const Matrix& block_wtw(int k) const { return wtw_[k]; }

private:
    const ConeLayout* cones_ = nullptr;
    Vector w_;
    Vector w2_;
    std::vector<Matrix> W_;
    std::vector<Matrix> Winv_;
    std::vector<Matrix> wtw_;
    Vector lambda_;
};

}  // namespace mthdro::detail
