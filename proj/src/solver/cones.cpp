#include "mthdro/detail/cones.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace mthdro::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

double soc_det(double t, const Eigen::Ref<const Vector>& u) {
    const double n = u.norm();
    return (t - n) * (t + n);
}

// Smallest positive root of a a^2 + 2 b a + c with c > 0.
double first_positive_root(double a, double b, double c) {
    if (a == 0.0) return b < 0.0 ? -c / (2.0 * b) : kInf;
    const double disc = b * b - a * c;
    if (disc < 0.0) return kInf;
    const double r = std::sqrt(disc);
    const double q = -(b + std::copysign(r, b));
    double best = kInf;
    if (q != 0.0) {
        const double r1 = q / a;
        const double r2 = c / q;
        if (r1 > 0.0) best = std::min(best, r1);
        if (r2 > 0.0) best = std::min(best, r2);
    }
    return best;
}

}  // namespace

int ConeLayout::dim() const {
    int d = l;
    for (int n : q) d += n;
    for (int n : s) d += svec_size(n);
    return d;
}

int ConeLayout::degree() const {
    int d = l + static_cast<int>(q.size());
    for (int n : s) d += n;
    return d;
}

int ConeLayout::soc_offset(int i) const {
    int off = l;
    for (int k = 0; k < i; ++k) off += q[k];
    return off;
}

int ConeLayout::psd_offset(int i) const {
    int off = soc_offset(static_cast<int>(q.size()));
    for (int k = 0; k < i; ++k) off += svec_size(s[k]);
    return off;
}

Vector svec(const Matrix& m) {
    const auto n = static_cast<int>(m.rows());
    Vector v(ConeLayout::svec_size(n));
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) v(k++) = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    return v;
}

Matrix smat(const Eigen::Ref<const Vector>& v, int n) {
    Matrix m(n, n);
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) {
            const double x = v(k++);
            if (i == j) {
                m(i, i) = x;
            } else {
                m(i, j) = m(j, i) = x / kSqrt2;
            }
        }
    return m;
}

Vector identity(const ConeLayout& cones) {
    Vector e = Vector::Zero(cones.dim());
    e.head(cones.l).setOnes();
    for (std::size_t i = 0; i < cones.q.size(); ++i) e(cones.soc_offset(static_cast<int>(i))) = 1.0;
    for (std::size_t i = 0; i < cones.s.size(); ++i) {
        const int n = cones.s[i];
        e.segment(cones.psd_offset(static_cast<int>(i)), ConeLayout::svec_size(n)) = svec(Matrix::Identity(n, n));
    }
    return e;
}

Vector jordan_product(const ConeLayout& cones, const Vector& u, const Vector& v) {
    Vector w(u.size());
    w.head(cones.l) = u.head(cones.l).cwiseProduct(v.head(cones.l));
    int off = cones.l;
    for (int n : cones.q) {
        const auto uu = u.segment(off, n);
        const auto vv = v.segment(off, n);
        w(off) = uu.dot(vv);
        w.segment(off + 1, n - 1) = uu(0) * vv.tail(n - 1) + vv(0) * uu.tail(n - 1);
        off += n;
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        const Matrix U = smat(u.segment(off, t), n);
        const Matrix V = smat(v.segment(off, t), n);
        w.segment(off, t) = svec(0.5 * (U * V + V * U));
        off += t;
    }
    return w;
}

Vector jordan_divide(const ConeLayout& cones, const Vector& lambda, const Vector& v) {
    Vector w(v.size());
    w.head(cones.l) = v.head(cones.l).cwiseQuotient(lambda.head(cones.l));
    int off = cones.l;
    for (int n : cones.q) {
        const auto l = lambda.segment(off, n);
        const auto vv = v.segment(off, n);
        const double rho = soc_det(l(0), l.tail(n - 1));
        const double x0 = (l(0) * vv(0) - l.tail(n - 1).dot(vv.tail(n - 1))) / rho;
        w(off) = x0;
        w.segment(off + 1, n - 1) = (vv.tail(n - 1) - x0 * l.tail(n - 1)) / l(0);
        off += n;
    }
    for (int n : cones.s) {
        int k = off;
        for (int j = 0; j < n; ++j) {
            const double lj = lambda(off + j * n - j * (j - 1) / 2);
            for (int i = j; i < n; ++i) {
                const double li = lambda(off + i * n - i * (i - 1) / 2);
                w(k) = 2.0 * v(k) / (li + lj);
                ++k;
            }
        }
        off += ConeLayout::svec_size(n);
    }
    return w;
}

double max_step(const ConeLayout& cones, const Vector& lambda, const Vector& d) {
    double alpha = kInf;
    for (int i = 0; i < cones.l; ++i)
        if (d(i) < 0.0) alpha = std::min(alpha, -lambda(i) / d(i));
    int off = cones.l;
    for (int n : cones.q) {
        const auto l = lambda.segment(off, n);
        const auto dd = d.segment(off, n);
        const double a = soc_det(dd(0), dd.tail(n - 1));
        const double b = l(0) * dd(0) - l.tail(n - 1).dot(dd.tail(n - 1));
        const double c = soc_det(l(0), l.tail(n - 1));
        alpha = std::min(alpha, first_positive_root(a, b, c));
        off += n;
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        Vector inv_sqrt(n);
        for (int j = 0; j < n; ++j) inv_sqrt(j) = 1.0 / std::sqrt(lambda(off + j * n - j * (j - 1) / 2));
        const Matrix D = inv_sqrt.asDiagonal() * smat(d.segment(off, t), n) * inv_sqrt.asDiagonal();
        const double emin = Eigen::SelfAdjointEigenSolver<Matrix>(D, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (emin < 0.0) alpha = std::min(alpha, -1.0 / emin);
        off += t;
    }
    return alpha;
}

double max_step_general(const ConeLayout& cones, const Vector& u, const Vector& d) {
    double alpha = kInf;
    for (int i = 0; i < cones.l; ++i)
        if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
    int off = cones.l;
    for (int n : cones.q) {
        const auto uu = u.segment(off, n);
        const auto dd = d.segment(off, n);
        alpha = std::min(alpha, first_positive_root(soc_det(dd(0), dd.tail(n - 1)),
                                                    uu(0) * dd(0) - uu.tail(n - 1).dot(dd.tail(n - 1)),
                                                    soc_det(uu(0), uu.tail(n - 1))));
        off += n;
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        const Matrix U = smat(u.segment(off, t), n);
        Eigen::LLT<Matrix> llt(U);
        const Matrix Li = llt.matrixL().solve(Matrix::Identity(n, n));
        const Matrix D = Li * smat(d.segment(off, t), n) * Li.transpose();
        const double emin = Eigen::SelfAdjointEigenSolver<Matrix>(D, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (emin < 0.0) alpha = std::min(alpha, -1.0 / emin);
        off += t;
    }
    return alpha;
}

double cone_margin(const ConeLayout& cones, const Vector& u) {
    double m = kInf;
    if (cones.l > 0) m = u.head(cones.l).minCoeff();
    int off = cones.l;
    for (int n : cones.q) {
        m = std::min(m, u(off) - u.segment(off + 1, n - 1).norm());
        off += n;
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        const Matrix U = smat(u.segment(off, t), n);
        m = std::min(m, Eigen::SelfAdjointEigenSolver<Matrix>(U, Eigen::EigenvaluesOnly).eigenvalues()(0));
        off += t;
    }
    return m;
}

Vector bring_to_cone(const ConeLayout& cones, const Vector& r) {
    double alpha = -0.99;
    const double margin = cone_margin(cones, r);
    if (std::isfinite(margin) && -margin > alpha) alpha = -margin;
    return r + (1.0 + alpha) * identity(cones);
}

// ---------------------------------------------------------------------------

void NtScaling::set_identity(const ConeLayout& cones) {
    cones_ = &cones;
    w_ = Vector::Ones(cones.l);
    w2_ = Vector::Ones(cones.l);
    W_.clear();
    Winv_.clear();
    wtw_.clear();
    for (int n : cones.q) {
        W_.push_back(Matrix::Identity(n, n));
        Winv_.push_back(Matrix::Identity(n, n));
        wtw_.push_back(Matrix::Identity(n, n));
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        W_.push_back(Matrix::Identity(t, t));
        Winv_.push_back(Matrix::Identity(t, t));
        wtw_.push_back(Matrix::Identity(t, t));
    }
    lambda_ = identity(cones);
}

bool NtScaling::update(const ConeLayout& cones, const Vector& s, const Vector& z) {
    cones_ = &cones;
    const int dim = cones.dim();
    lambda_.resize(dim);
    w_.resize(cones.l);
    w2_.resize(cones.l);
    for (int i = 0; i < cones.l; ++i) {
        if (!(s(i) > 0.0 && z(i) > 0.0)) return false;
        w2_(i) = s(i) / z(i);
        w_(i) = std::sqrt(w2_(i));
        lambda_(i) = std::sqrt(s(i) * z(i));
    }
    const std::size_t blocks = cones.q.size() + cones.s.size();
    W_.resize(blocks);
    Winv_.resize(blocks);
    wtw_.resize(blocks);
    int off = cones.l;
    std::size_t b = 0;
    for (int n : cones.q) {
        const Vector ss = s.segment(off, n);
        const Vector zz = z.segment(off, n);
        const double sdet = soc_det(ss(0), ss.tail(n - 1));
        const double zdet = soc_det(zz(0), zz.tail(n - 1));
        if (!(ss(0) > 0.0 && zz(0) > 0.0 && sdet > 0.0 && zdet > 0.0)) return false;
        const double snorm = std::sqrt(sdet);
        const double znorm = std::sqrt(zdet);
        const Vector sb = ss / snorm;
        const Vector zb = zz / znorm;
        const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        Vector wb(n);
        wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
        wb.tail(n - 1) = (sb.tail(n - 1) - zb.tail(n - 1)) / (2.0 * gamma);
        const double eta = std::sqrt(snorm / znorm);
        const double a = wb(0);
        const Vector q = wb.tail(n - 1);
        Matrix H(n, n);
        H(0, 0) = a;
        H.block(1, 0, n - 1, 1) = q;
        H.block(0, 1, 1, n - 1) = q.transpose();
        H.bottomRightCorner(n - 1, n - 1) = Matrix::Identity(n - 1, n - 1) + q * q.transpose() / (1.0 + a);
        W_[b] = eta * H;
        H.block(1, 0, n - 1, 1) *= -1.0;
        H.block(0, 1, 1, n - 1) *= -1.0;
        Winv_[b] = H / eta;
        wtw_[b] = W_[b] * W_[b];
        lambda_.segment(off, n) = W_[b] * zz;
        off += n;
        ++b;
    }
    for (int n : cones.s) {
        const int t = ConeLayout::svec_size(n);
        const Matrix S = smat(s.segment(off, t), n);
        const Matrix Z = smat(z.segment(off, t), n);
        Eigen::LLT<Matrix> ls(S);
        Eigen::LLT<Matrix> lz(Z);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
        const Matrix Ls = ls.matrixL();
        const Matrix Lz = lz.matrixL();
        Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector sig = svd.singularValues();
        if (!(sig.minCoeff() > 0.0)) return false;
        const Vector isq = sig.cwiseSqrt().cwiseInverse();
        const Matrix R = Ls * svd.matrixV() * isq.asDiagonal();
        const Matrix Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
        Matrix Wm(t, t);
        Matrix Wi(t, t);
        for (int k = 0; k < t; ++k) {
            const Matrix E = smat(Vector::Unit(t, k), n);
            Wm.col(k) = svec(R.transpose() * E * R);
            Wi.col(k) = svec(Rinv.transpose() * E * Rinv);
        }
        W_[b] = Wm;
        Winv_[b] = Wi;
        wtw_[b] = Wm.transpose() * Wm;
        lambda_.segment(off, t) = svec(Matrix(sig.asDiagonal()));
        off += t;
        ++b;
    }
    return true;
}

Vector NtScaling::apply_W(const Vector& v) const {
    Vector out(v.size());
    const auto& c = *cones_;
    out.head(c.l) = w_.cwiseProduct(v.head(c.l));
    int off = c.l;
    for (std::size_t b = 0; b < W_.size(); ++b) {
        const auto n = W_[b].rows();
        out.segment(off, n) = W_[b] * v.segment(off, n);
        off += static_cast<int>(n);
    }
    return out;
}

Vector NtScaling::apply_Wt(const Vector& v) const {
    Vector out(v.size());
    const auto& c = *cones_;
    out.head(c.l) = w_.cwiseProduct(v.head(c.l));
    int off = c.l;
    for (std::size_t b = 0; b < W_.size(); ++b) {
        const auto n = W_[b].rows();
        out.segment(off, n) = W_[b].transpose() * v.segment(off, n);
        off += static_cast<int>(n);
    }
    return out;
}

Vector NtScaling::apply_Winv(const Vector& v) const {
    Vector out(v.size());
    const auto& c = *cones_;
    out.head(c.l) = v.head(c.l).cwiseQuotient(w_);
    int off = c.l;
    for (std::size_t b = 0; b < Winv_.size(); ++b) {
        const auto n = Winv_[b].rows();
        out.segment(off, n) = Winv_[b] * v.segment(off, n);
        off += static_cast<int>(n);
    }
    return out;
}

Vector NtScaling::apply_WinvT(const Vector& v) const {
    Vector out(v.size());
    const auto& c = *cones_;
    out.head(c.l) = v.head(c.l).cwiseQuotient(w_);
    int off = c.l;
    for (std::size_t b = 0; b < Winv_.size(); ++b) {
        const auto n = Winv_[b].rows();
        out.segment(off, n) = Winv_[b].transpose() * v.segment(off, n);
        off += static_cast<int>(n);
    }
    return out;
}

}  // namespace mthdro::detail
