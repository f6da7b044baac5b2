#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mthdro/solver.hpp"

namespace mthdro {

namespace {

struct Cell {
    int row;
    int col;
};

// Transportation simplex on a spanning-tree basis. Nodes 0..m1-1 are rows,
// m1..m1+m2-1 columns; every basic cell is a tree edge.
class TransportSimplex {
public:
    TransportSimplex(const Matrix& costs, const Vector& supply, const Vector& demand)
        : c_(costs), m1_(static_cast<int>(costs.rows())), m2_(static_cast<int>(costs.cols())), x_(Matrix::Zero(m1_, m2_)) {
        northwest_corner(supply, demand);
    }

    bool run() {
        const double cmax = std::max(1.0, c_.cwiseAbs().maxCoeff());
        const double tol = 1e-12 * cmax;
        const long cap = 50L * m1_ * m2_ + 1000;
        for (long iter = 0; iter < cap; ++iter) {
            const bool bland = iter > cap / 2;
            potentials();
            int ei = -1;
            int ej = -1;
            double best = -tol;
            for (int i = 0; i < m1_ && !(bland && ei >= 0); ++i)
                for (int j = 0; j < m2_; ++j) {
                    if (basic_(i, j)) continue;
                    const double r = c_(i, j) - u_(i) - v_(j);
                    if (r < best) {
                        best = r;
                        ei = i;
                        ej = j;
                        if (bland) break;
                    }
                }
            if (ei < 0) return true;
            pivot(ei, ej);
        }
        return false;
    }

    const Matrix& plan() const { return x_; }

private:
    void northwest_corner(const Vector& supply, const Vector& demand) {
        basic_ = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m1_, m2_, false);
        Vector a = supply;
        Vector b = demand;
        int i = 0;
        int j = 0;
        while (true) {
            const double q = std::min(a(i), b(j));
            x_(i, j) = q;
            basic_(i, j) = true;
            cells_.push_back({i, j});
            a(i) -= q;
            b(j) -= q;
            if (i == m1_ - 1 && j == m2_ - 1) break;
            if (i < m1_ - 1 && (a(i) <= b(j) || j == m2_ - 1)) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void build_adjacency() {
        adj_.assign(m1_ + m2_, {});
        for (std::size_t k = 0; k < cells_.size(); ++k) {
            adj_[cells_[k].row].push_back(static_cast<int>(k));
            adj_[m1_ + cells_[k].col].push_back(static_cast<int>(k));
        }
    }

    void potentials() {
        build_adjacency();
        u_ = Vector::Zero(m1_);
        v_ = Vector::Zero(m2_);
        std::vector<char> seen(m1_ + m2_, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (int k : adj_[node]) {
                const Cell& cell = cells_[k];
                const int other = node < m1_ ? m1_ + cell.col : cell.row;
                if (seen[other]) continue;
                seen[other] = 1;
                if (node < m1_) {
                    v_(cell.col) = c_(cell.row, cell.col) - u_(cell.row);
                } else {
                    u_(cell.row) = c_(cell.row, cell.col) - v_(cell.col);
                }
                stack.push_back(other);
            }
        }
    }

    // Tree path (as cell indices) from column node of ej to row node ei.
    std::vector<int> tree_path(int ei, int ej) const {
        const int start = m1_ + ej;
        const int goal = ei;
        std::vector<int> parent_cell(m1_ + m2_, -1);
        std::vector<int> parent_node(m1_ + m2_, -1);
        std::vector<char> seen(m1_ + m2_, 0);
        std::vector<int> queue{start};
        seen[start] = 1;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            const int node = queue[h];
            if (node == goal) break;
            for (int k : adj_[node]) {
                const Cell& cell = cells_[k];
                const int other = node < m1_ ? m1_ + cell.col : cell.row;
                if (seen[other]) continue;
                seen[other] = 1;
                parent_cell[other] = k;
                parent_node[other] = node;
                queue.push_back(other);
            }
        }
        std::vector<int> path;
        for (int node = goal; node != start; node = parent_node[node]) path.push_back(parent_cell[node]);
        std::reverse(path.begin(), path.end());
        return path;
    }

    void pivot(int ei, int ej) {
        // Cycle: entering (+), then path cells from column ej back to row ei
        // alternate -, +, -, ...
        const std::vector<int> path = tree_path(ei, ej);
        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const Cell& cell = cells_[path[k]];
            const double val = x_(cell.row, cell.col);
            if (val < theta || (val == theta && path[k] < leave)) {
                theta = val;
                leave = path[k];
            }
        }
        theta = std::max(0.0, theta);
        x_(ei, ej) += theta;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const Cell& cell = cells_[path[k]];
            x_(cell.row, cell.col) += (k % 2 == 0 ? -theta : theta);
        }
        const Cell out = cells_[leave];
        x_(out.row, out.col) = 0.0;
        basic_(out.row, out.col) = false;
        cells_[leave] = {ei, ej};
        basic_(ei, ej) = true;
    }

    const Matrix& c_;
    int m1_;
    int m2_;
    Matrix x_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
    std::vector<Cell> cells_;
    std::vector<std::vector<int>> adj_;
    Vector u_;
    Vector v_;
};

}  // namespace

TransportResult solve_lp_transportation(const Matrix& costs, const Vector& supply, const Vector& demand) {
    require(costs.rows() >= 1 && costs.cols() >= 1, ErrorCode::InvalidArgument, "transportation: empty cost matrix");
    require(supply.size() == costs.rows() && demand.size() == costs.cols(), ErrorCode::DimensionMismatch,
            "transportation: supply/demand lengths must match the cost matrix");
    require((supply.array() >= 0.0).all() && (demand.array() >= 0.0).all(), ErrorCode::InvalidArgument,
            "transportation: supply and demand must be nonnegative");
    require(costs.allFinite(), ErrorCode::InvalidArgument, "transportation: costs must be finite");
    const double total = supply.sum();
    if (std::abs(total - demand.sum()) > 1e-10 * std::max(1.0, total))
        throw Error(ErrorCode::BalanceViolation, "transportation: supply and demand totals differ");

    TransportSimplex simplex(costs, supply, demand);
    TransportResult out;
    if (simplex.run()) {
        out.plan = simplex.plan().cwiseMax(0.0);
    } else {
        out = solve_transportation_generic(costs, supply, demand);
    }
    out.value = (out.plan.array() * costs.array()).sum();
    return out;
}

}  // namespace mthdro
