#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mthdro/detail/cones.hpp"
#include "mthdro/solver.hpp"

namespace mthdro {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using detail::ConeLayout;
using detail::NtScaling;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// min c'x + c0  s.t.  Ax = b,  Gx + s = h,  s in K.
struct StandardForm {
    int n = 0;
    int p = 0;
    int m = 0;
    Vector c;
    double c0 = 0.0;
    double sign = 1.0;
    SpMat A;
    Vector b;
    SpMat G;
    Vector h;
    ConeLayout cones;
};

StandardForm to_standard_form(const ConicProgram& prog) {
    StandardForm sf;
    sf.n = prog.num_variables();
    sf.sign = prog.sense() == Sense::Maximize ? -1.0 : 1.0;
    sf.c = Vector::Zero(sf.n);
    for (const auto& [i, a] : prog.objective().terms()) sf.c(i) += sf.sign * a;
    sf.c0 = sf.sign * prog.objective().constant();

    const auto& eqs = prog.equalities();
    sf.p = static_cast<int>(eqs.size());
    std::vector<Triplet> ta;
    sf.b.resize(sf.p);
    for (int r = 0; r < sf.p; ++r) {
        for (const auto& [i, a] : eqs[r].terms()) ta.emplace_back(r, i, a);
        sf.b(r) = -eqs[r].constant();
    }
    sf.A.resize(sf.p, sf.n);
    sf.A.setFromTriplets(ta.begin(), ta.end());

    const auto dims = prog.dimensions();
    sf.m = dims.inequalities + dims.soc_rows + dims.psd_rows;
    sf.h.resize(sf.m);
    std::vector<Triplet> tg;
    int row = 0;
    auto emit = [&](const LinearExpr& e, double scale) {
        for (const auto& [i, a] : e.terms()) tg.emplace_back(row, i, scale * a);
        sf.h(row) = -scale * e.constant();
        ++row;
    };
    for (const auto& e : prog.inequalities()) emit(e, 1.0);
    sf.cones.l = dims.inequalities;
    for (const auto& soc : prog.second_order_cones()) {
        emit(soc.t, -1.0);
        for (const auto& u : soc.u) emit(u, -1.0);
        sf.cones.q.push_back(1 + static_cast<int>(soc.u.size()));
    }
    const double sqrt2 = std::sqrt(2.0);
    for (const auto& psd : prog.psd_blocks()) {
        int k = 0;
        for (int j = 0; j < psd.dim; ++j)
            for (int i = j; i < psd.dim; ++i) emit(psd.lower[k++], i == j ? -1.0 : -sqrt2);
        sf.cones.s.push_back(psd.dim);
    }
    sf.G.resize(sf.m, sf.n);
    sf.G.setFromTriplets(tg.begin(), tg.end());
    return sf;
}

// Ruiz equilibration with one scalar per SOC/PSD block so cone membership is
// preserved.
struct Equilibration {
    Vector D;
    Vector EA;
    Vector EG;
};

Equilibration equilibrate(const StandardForm& sf, int passes) {
    Equilibration eq{Vector::Ones(sf.n), Vector::Ones(sf.p), Vector::Ones(sf.m)};
    for (int pass = 0; pass < passes; ++pass) {
        Vector col = Vector::Zero(sf.n);
        Vector rowA = Vector::Zero(sf.p);
        Vector rowG = Vector::Zero(sf.m);
        for (int j = 0; j < sf.n; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it) {
                const double v = std::abs(eq.EA(it.row()) * it.value() * eq.D(j));
                col(j) = std::max(col(j), v);
                rowA(it.row()) = std::max(rowA(it.row()), v);
            }
            for (SpMat::InnerIterator it(sf.G, j); it; ++it) {
                const double v = std::abs(eq.EG(it.row()) * it.value() * eq.D(j));
                col(j) = std::max(col(j), v);
                rowG(it.row()) = std::max(rowG(it.row()), v);
            }
        }
        auto block_max = [&](int off, int len) {
            if (len <= 0) return;
            const double mx = rowG.segment(off, len).maxCoeff();
            rowG.segment(off, len).setConstant(mx);
        };
        for (std::size_t i = 0; i < sf.cones.q.size(); ++i)
            block_max(sf.cones.soc_offset(static_cast<int>(i)), sf.cones.q[i]);
        for (std::size_t i = 0; i < sf.cones.s.size(); ++i)
            block_max(sf.cones.psd_offset(static_cast<int>(i)), ConeLayout::svec_size(sf.cones.s[i]));
        double worst = 0.0;
        auto rescale = [&worst](Vector& scale, const Vector& mx) {
            for (Eigen::Index i = 0; i < scale.size(); ++i) {
                if (mx(i) <= 0.0) continue;
                worst = std::max(worst, std::abs(1.0 - mx(i)));
                scale(i) = std::clamp(scale(i) / std::sqrt(mx(i)), 1e-6, 1e6);
            }
        };
        rescale(eq.D, col);
        rescale(eq.EA, rowA);
        rescale(eq.EG, rowG);
        if (worst < 1e-3) break;
    }
    return eq;
}

StandardForm apply_scaling(const StandardForm& sf, const Equilibration& eq) {
    StandardForm out = sf;
    out.c = eq.D.cwiseProduct(sf.c);
    out.b = eq.EA.cwiseProduct(sf.b);
    out.h = eq.EG.cwiseProduct(sf.h);
    out.A = eq.EA.asDiagonal() * sf.A * eq.D.asDiagonal();
    out.G = eq.EG.asDiagonal() * sf.G * eq.D.asDiagonal();
    out.A.makeCompressed();
    out.G.makeCompressed();
    return out;
}

// Quasi-definite KKT matrix [[dI, A', G'], [A, -dI, 0], [G, 0, -W'W - dI]],
// lower triangle only; the sparsity pattern is fixed across iterations.
class KktSystem {
public:
    KktSystem(const StandardForm& sf, double delta) : sf_(sf), delta_(delta) {
        n_ = sf.n;
        p_ = sf.p;
        m_ = sf.m;
        N_ = n_ + p_ + m_;
    }

    /// Factors with the static regularization, raising it when a pivot vanishes.
    bool factor(const NtScaling& W) {
        for (double delta = delta_; delta <= 1e3 * delta_; delta *= 10.0) {
            if (factor_with(W, delta)) return true;
        }
        return false;
    }

    Vector solve(const Vector& rhs, int steps) const {
        Vector x = ldlt_.solve(rhs);
        if (!x.allFinite()) return x;
        const double scale = 1.0 + inf_norm(rhs);
        double prev = kInf;
        for (int k = 0; k < steps; ++k) {
            const Vector r = rhs - (K_.selfadjointView<Eigen::Lower>() * x - reg_.cwiseProduct(x));
            const double err = inf_norm(r);
            if (err <= 1e-14 * scale || err >= 0.5 * prev) break;
            prev = err;
            const Vector dx = ldlt_.solve(r);
            if (!dx.allFinite()) break;
            x += dx;
        }
        return x;
    }

private:
    bool factor_with(const NtScaling& W, double delta) {
        std::vector<Triplet> t;
        for (int j = 0; j < n_; ++j) {
            t.emplace_back(j, j, delta);
            for (SpMat::InnerIterator it(sf_.A, j); it; ++it) t.emplace_back(n_ + it.row(), j, it.value());
            for (SpMat::InnerIterator it(sf_.G, j); it; ++it) t.emplace_back(n_ + p_ + it.row(), j, it.value());
        }
        for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -delta);
        const auto& cones = sf_.cones;
        const int z0 = n_ + p_;
        const Vector& w2 = W.orthant_wtw();
        for (int i = 0; i < cones.l; ++i) t.emplace_back(z0 + i, z0 + i, -w2(i) - delta);
        int off = cones.l;
        const std::size_t blocks = cones.q.size() + cones.s.size();
        for (std::size_t b = 0; b < blocks; ++b) {
            const Matrix& B = W.block_wtw(static_cast<int>(b));
            const auto len = static_cast<int>(B.rows());
            for (int j = 0; j < len; ++j)
                for (int i = j; i < len; ++i)
                    t.emplace_back(z0 + off + i, z0 + off + j, -0.5 * (B(i, j) + B(j, i)) - (i == j ? delta : 0.0));
            off += len;
        }
        K_.resize(N_, N_);
        K_.setFromTriplets(t.begin(), t.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
        ldlt_.factorize(K_);
        reg_ = Vector::Constant(N_, -delta);
        reg_.head(n_).setConstant(delta);
        return ldlt_.info() == Eigen::Success;
    }

    const StandardForm& sf_;
    double delta_;
    int n_ = 0;
    int p_ = 0;
    int m_ = 0;
    int N_ = 0;
    Vector reg_;
    SpMat K_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
};

struct Iterate {
    Vector x, y, z, s;
    double tau = 1.0;
    double kappa = 1.0;
};

struct Metrics {
    double pres = kInf;
    double dres = kInf;
    double gap = kInf;
    double relgap = kInf;
    double pcost = 0.0;
    double dcost = 0.0;
    double pinf_res = kInf;  // residual of a normalized primal-infeasibility certificate
    double dinf_res = kInf;
    bool pinf_candidate = false;
    bool dinf_candidate = false;
};

// Residuals of the unscaled problem at the unscaled iterate.
Metrics measure(const StandardForm& sf, const Iterate& it) {
    Metrics mt;
    const Vector Ax = sf.A * it.x;
    const Vector Gx = sf.G * it.x;
    const Vector Aty = sf.A.transpose() * it.y;
    const Vector Gtz = sf.G.transpose() * it.z;
    const double tau = it.tau;
    const double ep = inf_norm((Ax - tau * sf.b) / tau) / (1.0 + std::max(inf_norm(sf.b), inf_norm(Ax / tau)));
    const double ip = inf_norm((Gx + it.s - tau * sf.h) / tau) / (1.0 + std::max(inf_norm(sf.h), inf_norm(Gx / tau)));
    mt.pres = std::max(ep, ip);
    mt.dres = inf_norm((Aty + Gtz + tau * sf.c) / tau) / (1.0 + inf_norm(sf.c));
    mt.pcost = sf.c.dot(it.x) / tau;
    mt.dcost = -(sf.b.dot(it.y) + sf.h.dot(it.z)) / tau;
    mt.gap = it.s.dot(it.z) / (tau * tau);
    mt.relgap = mt.gap / std::max(1.0, std::min(std::abs(mt.pcost), std::abs(mt.dcost)));

    const double dualobj = -(sf.b.dot(it.y) + sf.h.dot(it.z));
    if (dualobj > 0.0) {
        mt.pinf_candidate = it.tau < it.kappa;
        mt.pinf_res = inf_norm(Aty + Gtz) / dualobj;
    }
    const double cx = -sf.c.dot(it.x);
    if (cx > 0.0) {
        mt.dinf_candidate = it.tau < it.kappa;
        mt.dinf_res = std::max(inf_norm(Ax), inf_norm(Gx + it.s)) / cx;
    }
    return mt;
}

Iterate unscale(const Iterate& it, const Equilibration& eq) {
    Iterate out;
    out.x = eq.D.cwiseProduct(it.x);
    out.y = eq.EA.cwiseProduct(it.y);
    out.z = eq.EG.cwiseProduct(it.z);
    out.s = it.s.cwiseQuotient(eq.EG);
    out.tau = it.tau;
    out.kappa = it.kappa;
    return out;
}

bool converged(const Metrics& mt, const SolverConfig& cfg, double factor) {
    return mt.pres <= factor * cfg.feasibility_tolerance && mt.dres <= factor * cfg.feasibility_tolerance &&
           (mt.relgap <= factor * cfg.gap_tolerance);
}

double merit(const Metrics& mt, const SolverConfig& cfg) {
    return std::max({mt.pres / cfg.feasibility_tolerance, mt.dres / cfg.feasibility_tolerance,
                     mt.relgap / cfg.gap_tolerance});
}

struct Outcome {
    SolveStatus status = SolveStatus::NumericalFailure;
    Iterate it;  // unscaled
    Metrics metrics;
    int iterations = 0;
};

Outcome run_hsd(const StandardForm& orig, const SolverConfig& cfg) {
    const Equilibration eq = equilibrate(orig, cfg.equilibration_passes);
    const StandardForm sf = apply_scaling(orig, eq);
    const ConeLayout& cones = sf.cones;
    const int n = sf.n;
    const int p = sf.p;
    const int m = sf.m;
    const double nu = cones.degree();
    const Vector e = detail::identity(cones);

    Outcome out;
    KktSystem kkt(sf, cfg.static_regularization);
    NtScaling W;
    W.set_identity(cones);
    if (!kkt.factor(W)) return out;

    Iterate it;
    {
        Vector rhs = Vector::Zero(n + p + m);
        rhs.segment(n, p) = sf.b;
        rhs.tail(m) = sf.h;
        const Vector sol = kkt.solve(rhs, cfg.refinement_steps);
        it.x = sol.head(n);
        it.s = detail::bring_to_cone(cones, -sol.tail(m));
        rhs.setZero();
        rhs.head(n) = -sf.c;
        const Vector sol2 = kkt.solve(rhs, cfg.refinement_steps);
        it.y = sol2.segment(n, p);
        it.z = detail::bring_to_cone(cones, sol2.tail(m));
        it.tau = 1.0;
        it.kappa = 1.0;
        if (!it.x.allFinite() || !it.s.allFinite() || !it.y.allFinite() || !it.z.allFinite()) return out;
    }

    Vector rhs1(n + p + m);
    rhs1.head(n) = -sf.c;
    rhs1.segment(n, p) = sf.b;
    rhs1.tail(m) = sf.h;

    Outcome best;
    double best_merit = kInf;
    int stalls = 0;

    for (int iter = 0; iter <= cfg.max_iterations; ++iter) {
        const Iterate un = unscale(it, eq);
        const Metrics mt = measure(orig, un);
        out.iterations = iter;
        if (converged(mt, cfg, 1.0)) {
            out.status = SolveStatus::Optimal;
            out.it = un;
            out.metrics = mt;
            return out;
        }
        if (mt.pinf_candidate && mt.pinf_res <= cfg.feasibility_tolerance) {
            out.status = SolveStatus::Infeasible;
            out.it = un;
            out.metrics = mt;
            return out;
        }
        if (mt.dinf_candidate && mt.dinf_res <= cfg.feasibility_tolerance) {
            out.status = SolveStatus::Unbounded;
            out.it = un;
            out.metrics = mt;
            return out;
        }
        const double mrt = merit(mt, cfg);
        if (mrt < best_merit && std::isfinite(mrt)) {
            best_merit = mrt;
            best.it = un;
            best.metrics = mt;
            best.iterations = iter;
        }
        if (iter == cfg.max_iterations) break;

        const Vector rx = -(sf.A.transpose() * it.y) - sf.G.transpose() * it.z - it.tau * sf.c;
        const Vector ry = sf.A * it.x - it.tau * sf.b;
        const Vector rz = it.s + sf.G * it.x - it.tau * sf.h;
        const double rt = it.kappa + sf.c.dot(it.x) + sf.b.dot(it.y) + sf.h.dot(it.z);
        const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (nu + 1.0);
        if (!std::isfinite(mu)) break;

        if (!W.update(cones, it.s, it.z)) break;
        if (!kkt.factor(W)) break;
        const Vector& lambda = W.lambda();

        const Vector sol1 = kkt.solve(rhs1, cfg.refinement_steps);
        const auto x1 = sol1.head(n);
        const auto y1 = sol1.segment(n, p);
        const auto z1 = sol1.tail(m);
        const double denom = it.kappa / it.tau - (sf.c.dot(x1) + sf.b.dot(y1) + sf.h.dot(z1));

        // Predictor.
        Vector rhs2(n + p + m);
        rhs2.head(n) = rx;
        rhs2.segment(n, p) = -ry;
        rhs2.tail(m) = it.s - rz;
        const Vector sol2 = kkt.solve(rhs2, cfg.refinement_steps);
        const double dtau_aff =
            (rt - it.kappa + sf.c.dot(sol2.head(n)) + sf.b.dot(sol2.segment(n, p)) + sf.h.dot(sol2.tail(m))) / denom;
        const Vector dz_aff = sol2.tail(m) + dtau_aff * z1;
        const Vector Wdz_aff = W.apply_W(dz_aff);
        const Vector ds_aff_w = -Wdz_aff - lambda;
        const double dkap_aff = -it.kappa - it.kappa / it.tau * dtau_aff;

        auto step_to_boundary = [&](const Vector& dsw, const Vector& dzw, double dtau, double dkap) {
            double a = std::min(detail::max_step(cones, lambda, dsw), detail::max_step(cones, lambda, dzw));
            if (dtau < 0.0) a = std::min(a, -it.tau / dtau);
            if (dkap < 0.0) a = std::min(a, -it.kappa / dkap);
            return a;
        };

        const double alpha_aff = std::min(1.0, step_to_boundary(ds_aff_w, Wdz_aff, dtau_aff, dkap_aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 1e-4, 1.0);

        // Corrector.
        const Vector ds1 = detail::jordan_product(cones, lambda, lambda) +
                           detail::jordan_product(cones, ds_aff_w, Wdz_aff) - sigma * mu * e;
        const Vector ds2 = detail::jordan_divide(cones, lambda, ds1);
        Vector rhs3(n + p + m);
        rhs3.head(n) = (1.0 - sigma) * rx;
        rhs3.segment(n, p) = -(1.0 - sigma) * ry;
        rhs3.tail(m) = -(1.0 - sigma) * rz + W.apply_Wt(ds2);
        const Vector sol3 = kkt.solve(rhs3, cfg.refinement_steps);
        const double bkap = it.kappa * it.tau + dkap_aff * dtau_aff - sigma * mu;
        const double dtau = ((1.0 - sigma) * rt - bkap / it.tau + sf.c.dot(sol3.head(n)) +
                             sf.b.dot(sol3.segment(n, p)) + sf.h.dot(sol3.tail(m))) /
                            denom;
        const Vector dx = sol3.head(n) + dtau * x1;
        const Vector dy = sol3.segment(n, p) + dtau * y1;
        const Vector dz = sol3.tail(m) + dtau * z1;
        const Vector Wdz = W.apply_W(dz);
        const Vector ds_w = -(ds2 + Wdz);
        const Vector ds = W.apply_Wt(ds_w);
        const double dkap = -(bkap + it.kappa * dtau) / it.tau;

        double alpha = step_to_boundary(ds_w, Wdz, dtau, dkap);
        alpha = std::min(1.0, 0.99 * alpha);
        if (!std::isfinite(alpha) || !dx.allFinite() || !dz.allFinite() || !ds.allFinite()) break;
        if (alpha < 1e-10) {
            if (++stalls >= 3) break;
        } else {
            stalls = 0;
        }

        it.x += alpha * dx;
        it.y += alpha * dy;
        it.z += alpha * dz;
        it.s += alpha * ds;
        it.tau += alpha * dtau;
        it.kappa += alpha * dkap;
    }

    if (std::isfinite(best_merit) && converged(best.metrics, cfg, cfg.reduced_accuracy_factor)) {
        best.status = SolveStatus::Optimal;
        return best;
    }
    const Iterate un = unscale(it, eq);
    const Metrics mt = measure(orig, un);
    const double loose = cfg.reduced_accuracy_factor * cfg.feasibility_tolerance;
    if (mt.pinf_candidate && mt.pinf_res <= loose) {
        out.status = SolveStatus::Infeasible;
    } else if (mt.dinf_candidate && mt.dinf_res <= loose) {
        out.status = SolveStatus::Unbounded;
    } else {
        out.status = SolveStatus::NumericalFailure;
    }
    out.it = un;
    out.metrics = mt;
    return out;
}

std::shared_ptr<const ConicBackend>& backend_slot() {
    static std::shared_ptr<const ConicBackend> slot = std::make_shared<InteriorPointBackend>();
    return slot;
}

std::mutex& backend_mutex() {
    static std::mutex mu;
    return mu;
}

}  // namespace

void SolverConfig::validate() const {
    require(max_iterations >= 1, ErrorCode::InvalidArgument, "max_iterations must be positive");
    require(gap_tolerance > 0.0 && feasibility_tolerance > 0.0 && static_regularization > 0.0,
            ErrorCode::InvalidArgument, "solver tolerances must be positive");
    require(reduced_accuracy_factor >= 1.0, ErrorCode::InvalidArgument, "reduced_accuracy_factor must be >= 1");
}

Solution InteriorPointBackend::solve(const ConicProgram& program, const SolverConfig& config) const {
    config.validate();
    const StandardForm sf = to_standard_form(program);
    const Outcome out = run_hsd(sf, config);

    Solution sol;
    sol.backend = name();
    sol.status = out.status;
    sol.iterations = out.iterations;
    sol.primal_residual = out.metrics.pres;
    sol.dual_residual = out.metrics.dres;
    sol.gap = out.metrics.gap;
    if (out.it.x.size() != sf.n) {
        sol.x = Vector::Zero(sf.n);
        attach_groups(program, sol);
        return sol;
    }
    const double tau = out.status == SolveStatus::Optimal ? out.it.tau : 1.0;
    sol.x = out.it.x / tau;
    const Vector y = out.it.y / tau;
    const Vector z = out.it.z / tau;
    if (out.status == SolveStatus::Optimal) {
        sol.value = sf.sign * (sf.c.dot(sol.x) + sf.c0);
        sol.dual_value = sf.sign * (-(sf.b.dot(y) + sf.h.dot(z)) + sf.c0);
    } else if (out.status == SolveStatus::Infeasible) {
        sol.value = sol.dual_value = sf.sign * kInf;
    } else if (out.status == SolveStatus::Unbounded) {
        sol.value = sol.dual_value = -sf.sign * kInf;
    } else {
        sol.value = sol.dual_value = std::numeric_limits<double>::quiet_NaN();
    }
    sol.equality_duals = y;
    sol.inequality_duals = z.head(sf.cones.l);
    for (std::size_t i = 0; i < sf.cones.q.size(); ++i)
        sol.soc_duals.push_back(z.segment(sf.cones.soc_offset(static_cast<int>(i)), sf.cones.q[i]));
    for (std::size_t i = 0; i < sf.cones.s.size(); ++i) {
        const int dim = sf.cones.s[i];
        sol.psd_duals.push_back(
            detail::smat(z.segment(sf.cones.psd_offset(static_cast<int>(i)), ConeLayout::svec_size(dim)), dim));
    }
    attach_groups(program, sol);
    return sol;
}

std::shared_ptr<const ConicBackend> default_backend() {
    std::lock_guard<std::mutex> lock(backend_mutex());
    return backend_slot();
}

void set_default_backend(std::shared_ptr<const ConicBackend> backend) {
    require(backend != nullptr, ErrorCode::InvalidArgument, "backend must not be null");
    std::lock_guard<std::mutex> lock(backend_mutex());
    backend_slot() = std::move(backend);
}

Solution solve(const ConicProgram& program, const SolverConfig& config) {
    return default_backend()->solve(program, config);
}

}  // namespace mthdro
