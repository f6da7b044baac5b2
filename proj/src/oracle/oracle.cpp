#include "mthdro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mthdro {

void GridSpec::validate() const {
    require(!count.empty(), ErrorCode::InvalidArgument, "grid has no dimensions");
    require(lo.size() == count.size() && hi.size() == count.size(), ErrorCode::DimensionMismatch,
            "grid lo/hi/count lengths differ");
    for (std::size_t i = 0; i < count.size(); ++i) {
        require(count[i] >= 2, ErrorCode::InvalidArgument, "grid counts must be >= 2");
        require(lo[i] < hi[i], ErrorCode::InvalidArgument, "grid requires lo < hi");
    }
}

Matrix GridSpec::points(const Polyhedron& Xi) const {
    validate();
    const int d = dim();
    require(Xi.rows() == 0 || Xi.dim() == d, ErrorCode::DimensionMismatch, "grid and support dimensions differ");
    std::size_t total = 1;
    for (int c : count) {
        total *= static_cast<std::size_t>(c);
        require(total <= kGridVariableCap, ErrorCode::CapExceeded, "grid exceeds the point cap");
    }
    Matrix out(static_cast<Eigen::Index>(total), d);
    std::vector<int> idx(d, 0);
    Vector g(d);
    Eigen::Index kept = 0;
    for (std::size_t t = 0; t < total; ++t) {
        for (int i = 0; i < d; ++i) {
            g(i) = idx[i] == count[i] - 1 ? hi[i] : lo[i] + (hi[i] - lo[i]) * idx[i] / (count[i] - 1);
        }
        if (Xi.rows() == 0 || Xi.contains(g)) out.row(kept++) = g.transpose();
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < count[i]) break;
            idx[i] = 0;
        }
    }
    out.conservativeResize(kept, d);
    return out;
}

namespace {

// max c'x s.t. Ax = b, x >= 0, b >= 0, for the coupling LP. Columns are
// generated on the fly: coupling (l, g) has a 1 in row l and cost_k(l, g) in
// row M + k; then n slacks, then M artificials.
class CouplingSimplex {
public:
    CouplingSimplex(int M, int G, int n, std::vector<double> costs, Vector hvals, Vector rhs)
        : M_(M), G_(G), n_(n), m_(M + n), costs_(std::move(costs)), h_(std::move(hvals)), b_(std::move(rhs)) {
        ncoup_ = static_cast<long>(M) * G;
        ncols_ = ncoup_ + n_ + M_;
        basic_row_.assign(ncols_, -1);
        basis_.resize(m_);
        for (int i = 0; i < M_; ++i) set_basic(artificial(i), i);
        for (int k = 0; k < n_; ++k) set_basic(ncoup_ + k, M_ + k);
        Binv_ = Matrix::Identity(m_, m_);
        xB_ = b_;
    }

    double run(int& iterations) {
        phase_ = 1;
        iterate(iterations);
        double infeas = 0.0;
        for (int i = 0; i < m_; ++i) {
            if (is_artificial(basis_[i])) infeas += xB_(i);
        }
        const double scale = 1.0 + b_.cwiseAbs().sum();
        require(infeas <= 1e-9 * scale, ErrorCode::InfeasibleGrid, "no coupling onto the grid meets the budgets");
        drive_out_artificials();
        phase_ = 2;
        iterate(iterations);
        double value = 0.0;
        for (int i = 0; i < m_; ++i) value += cost(basis_[i]) * xB_(i);
        return value;
    }

    Matrix coupling() const {
        Matrix pi = Matrix::Zero(M_, G_);
        for (int i = 0; i < m_; ++i) {
            const long j = basis_[i];
            if (j < ncoup_) pi(j / G_, j % G_) = std::max(0.0, xB_(i));
        }
        return pi;
    }

private:
    long artificial(int l) const { return ncoup_ + n_ + l; }
    bool is_artificial(long j) const { return j >= ncoup_ + n_; }

    void set_basic(long j, int row) {
        basis_[row] = j;
        basic_row_[j] = row;
    }

    double cost(long j) const {
        if (phase_ == 1) return is_artificial(j) ? -1.0 : 0.0;
        return j < ncoup_ ? h_(j % G_) : 0.0;
    }

    // y' A_j for the sparse column j.
    double price(const Vector& y, long j) const {
        if (j < ncoup_) {
            const int l = static_cast<int>(j / G_);
            double s = y(l);
            const double* c = &costs_[static_cast<std::size_t>(j) * n_];
            for (int k = 0; k < n_; ++k) s += y(M_ + k) * c[k];
            return s;
        }
        if (j < ncoup_ + n_) return y(M_ + static_cast<int>(j - ncoup_));
        return y(static_cast<int>(j - ncoup_ - n_));
    }

    Vector column_image(long j) const {
        if (j < ncoup_) {
            const int l = static_cast<int>(j / G_);
            Vector d = Binv_.col(l);
            const double* c = &costs_[static_cast<std::size_t>(j) * n_];
            for (int k = 0; k < n_; ++k) d += c[k] * Binv_.col(M_ + k);
            return d;
        }
        if (j < ncoup_ + n_) return Binv_.col(M_ + static_cast<int>(j - ncoup_));
        return Binv_.col(static_cast<int>(j - ncoup_ - n_));
    }

    Vector dense_column(long j) const {
        Vector a = Vector::Zero(m_);
        if (j < ncoup_) {
            a(static_cast<int>(j / G_)) = 1.0;
            for (int k = 0; k < n_; ++k) a(M_ + k) = costs_[static_cast<std::size_t>(j) * n_ + k];
        } else if (j < ncoup_ + n_) {
            a(M_ + static_cast<int>(j - ncoup_)) = 1.0;
        } else {
            a(static_cast<int>(j - ncoup_ - n_)) = 1.0;
        }
        return a;
    }

    void refactor() {
        Matrix B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = dense_column(basis_[i]);
        Binv_ = B.partialPivLu().inverse();
        xB_ = Binv_ * b_;
        for (int i = 0; i < m_; ++i) {
            if (xB_(i) < 0.0 && xB_(i) > -1e-12) xB_(i) = 0.0;
        }
    }

    void pivot(long enter, int row, const Vector& d) {
        const double theta = xB_(row) / d(row);
        xB_ -= theta * d;
        xB_(row) = theta;
        const Eigen::RowVectorXd prow = Binv_.row(row) / d(row);
        for (int i = 0; i < m_; ++i) {
            if (i != row && d(i) != 0.0) Binv_.row(i) -= d(i) * prow;
        }
        Binv_.row(row) = prow;
        basic_row_[basis_[row]] = -1;
        set_basic(enter, row);
        if (++since_refactor_ >= 100) {
            refactor();
            since_refactor_ = 0;
        }
    }

    void iterate(int& iterations) {
        double cmax = 1.0;
        for (int g = 0; g < G_; ++g) cmax = std::max(cmax, std::abs(h_(g)));
        const double dtol = 1e-10 * cmax;
        int degenerate = 0;
        const int cap = 50 * (m_ + 100) + static_cast<int>(std::min<long>(ncols_, 200000));
        for (int it = 0;; ++it) {
            require(it < cap, ErrorCode::SolverFailure, "grid simplex iteration cap reached");
            Vector cB(m_);
            for (int i = 0; i < m_; ++i) cB(i) = cost(basis_[i]);
            const Vector y = Binv_.transpose() * cB;
            const bool bland = degenerate > 50;
            long enter = -1;
            double best = dtol;
            for (long j = 0; j < ncols_; ++j) {
                if (basic_row_[j] >= 0 || (phase_ == 2 && is_artificial(j))) continue;
                const double dj = cost(j) - price(y, j);
                if (dj > best) {
                    enter = j;
                    best = dj;
                    if (bland) break;
                }
            }
            if (enter < 0) return;
            const Vector d = column_image(enter);
            int row = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                if (d(i) <= 1e-11) continue;
                const double r = std::max(0.0, xB_(i)) / d(i);
                if (r < ratio - 1e-14 || (r <= ratio + 1e-14 && row >= 0 && basis_[i] < basis_[row])) {
                    ratio = r;
                    row = i;
                }
            }
            require(row >= 0, ErrorCode::SolverFailure, "grid simplex found an unbounded ray");
            degenerate = ratio <= 1e-14 ? degenerate + 1 : 0;
            pivot(enter, row, d);
            ++iterations;
        }
    }

    void drive_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (!is_artificial(basis_[r])) continue;
            const Eigen::RowVectorXd brow = Binv_.row(r);
            long enter = -1;
            double best = 1e-9;
            for (long j = 0; j < ncoup_ + n_; ++j) {
                if (basic_row_[j] >= 0) continue;
                const double v = std::abs(price(brow.transpose(), j));
                if (v > best) {
                    best = v;
                    enter = j;
                }
            }
            if (enter >= 0) {
                const Vector d = column_image(enter);
                xB_(r) = 0.0;
                pivot(enter, r, d);
            }
        }
    }

    int M_, G_, n_, m_;
    long ncoup_ = 0, ncols_ = 0;
    std::vector<double> costs_;
    Vector h_, b_;
    std::vector<long> basis_;
    std::vector<int> basic_row_;
    Matrix Binv_;
    Vector xB_;
    int phase_ = 1;
    int since_refactor_ = 0;
};

}  // namespace

GridValue primal_points_value(const MthSpec& mth, const Objective& h, const Matrix& points) {
    const int G = static_cast<int>(points.rows());
    require(G > 0, ErrorCode::InfeasibleGrid, "no grid point inside the support");
    require(points.cols() == mth.dim(), ErrorCode::DimensionMismatch, "grid and reference dimensions differ");
    const auto& ref = mth.reference();
    const auto& cs = mth.structure();
    const int M = ref.size();
    const int n = cs.components();
    require(static_cast<std::size_t>(M) * static_cast<std::size_t>(G) <= kGridVariableCap, ErrorCode::CapExceeded,
            "grid coupling exceeds " + std::to_string(kGridVariableCap) + " variables");
    std::vector<double> costs(static_cast<std::size_t>(M) * G * n);
    for (int l = 0; l < M; ++l) {
        const Vector a = ref.atom(l);
        for (int g = 0; g < G; ++g) {
            const Vector pt = points.row(g).transpose();
            for (int k = 0; k < n; ++k) {
                costs[(static_cast<std::size_t>(l) * G + g) * n + k] = std::pow(cs.distance(k, a, pt), cs.p());
            }
        }
    }
    Vector hv(G);
    for (int g = 0; g < G; ++g) hv(g) = h(points.row(g).transpose());
    Vector rhs(M + n);
    rhs.head(M) = ref.weights();
    rhs.tail(n) = mth.powered_budgets();
    CouplingSimplex lp(M, G, n, std::move(costs), hv, rhs);
    GridValue out;
    out.value = lp.run(out.iterations);
    out.coupling = lp.coupling();
    out.points = points;
    return out;
}

double primal_grid_value(const MthSpec& mth, const Objective& h, const GridSpec& grid, const Polyhedron& Xi) {
    const Matrix pts = grid.points(Xi);
    require(pts.rows() > 0, ErrorCode::InfeasibleGrid, "no grid point inside the support");
    return primal_points_value(mth, h, pts).value;
}

double empirical_cvar(const Eigen::Ref<const Vector>& samples, double alpha) {
    require(samples.size() > 0, ErrorCode::InvalidArgument, "CVaR needs at least one sample");
    return empirical_cvar(samples, Vector::Constant(samples.size(), 1.0 / samples.size()), alpha);
}

double empirical_cvar(const Eigen::Ref<const Vector>& samples, const Eigen::Ref<const Vector>& weights, double alpha) {
    require(samples.size() > 0, ErrorCode::InvalidArgument, "CVaR needs at least one sample");
    require(samples.size() == weights.size(), ErrorCode::DimensionMismatch, "samples and weights differ in length");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return samples(a) > samples(b); });
    const double total = weights.sum();
    double remaining = alpha * total;
    double acc = 0.0;
    for (int i : order) {
        const double take = std::min(weights(i), remaining);
        acc += take * samples(i);
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    if (remaining > 0.0) acc += remaining * samples(order.back());
    return acc / (alpha * total);
}

}  // namespace mthdro
