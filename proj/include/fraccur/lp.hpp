#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"

namespace fraccur {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::iteration_limit;
    std::vector<double> x;    // primal solution
    std::vector<double> y;    // row duals
    double objective = 0;     // c^T x
    double dual_objective = 0; // b^T y
    long iterations = 0;
};

// min c^T x  subject to  A x = b, x >= 0.  A is row-major (rows x cols).
struct DenseLp {
    int rows = 0, cols = 0;
    std::vector<double> a, b, c;

    double& at(int r, int j) { return a[std::size_t(r) * std::size_t(cols) + std::size_t(j)]; }
    double at(int r, int j) const { return a[std::size_t(r) * std::size_t(cols) + std::size_t(j)]; }
};

namespace detail {

// Revised simplex on an explicit basis inverse, Bland's rule for entering and
// leaving variables so degenerate pivots cannot cycle.
class RevisedSimplex {
public:
    RevisedSimplex(const DenseLp& lp, double tol, long max_iter)
        : lp_(lp), m_(lp.rows), n_(lp.cols), tol_(tol), max_iter_(max_iter) {}

    LpResult solve() {
        LpResult res;
        flip_.assign(std::size_t(m_), 1.0);
        bb_ = lp_.b;
        for (int i = 0; i < m_; ++i)
            if (bb_[i] < 0) {
                flip_[i] = -1.0;
                bb_[i] = -bb_[i];
            }
        // columns n_..n_+m_-1 are artificials
        basis_.resize(std::size_t(m_));
        binv_.assign(std::size_t(m_) * std::size_t(m_), 0.0);
        for (int i = 0; i < m_; ++i) {
            basis_[i] = n_ + i;
            binv_[std::size_t(i) * std::size_t(m_) + std::size_t(i)] = 1.0;
        }
        xb_ = bb_;
        is_basic_.assign(std::size_t(n_ + m_), -1);
        for (int i = 0; i < m_; ++i) is_basic_[basis_[i]] = i;

        std::vector<double> cost1(std::size_t(n_ + m_), 0.0);
        for (int i = 0; i < m_; ++i) cost1[n_ + i] = 1.0;
        LpStatus st = run(cost1, true, res.iterations);
        if (st == LpStatus::iteration_limit) {
            res.status = st;
            return res;
        }
        double infeas = 0, bscale = 1;
        for (int i = 0; i < m_; ++i) {
            bscale = std::max(bscale, std::abs(bb_[i]));
            if (basis_[i] >= n_) infeas += xb_[i];
        }
        if (infeas > 1e-7 * bscale) {
            res.status = LpStatus::infeasible;
            return res;
        }
        drive_out_artificials();

        std::vector<double> cost2(std::size_t(n_ + m_), 0.0);
        for (int j = 0; j < n_; ++j) cost2[j] = lp_.c[j];
        st = run(cost2, false, res.iterations);
        res.status = st;
        if (st != LpStatus::optimal) return res;

        res.x.assign(std::size_t(n_), 0.0);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n_) res.x[basis_[i]] = std::max(0.0, xb_[i]);
        auto y = duals(cost2);
        res.y.resize(std::size_t(m_));
        for (int i = 0; i < m_; ++i) res.y[i] = y[i] * flip_[i];
        res.objective = 0;
        for (int j = 0; j < n_; ++j) res.objective += lp_.c[j] * res.x[j];
        res.dual_objective = 0;
        for (int i = 0; i < m_; ++i) res.dual_objective += lp_.b[i] * res.y[i];
        return res;
    }

private:
    double col_entry(int r, int j) const {
        if (j < n_) return flip_[r] * lp_.at(r, j);
        return (j - n_ == r) ? 1.0 : 0.0;
    }

    std::vector<double> duals(const std::vector<double>& cost) const {
        std::vector<double> y(std::size_t(m_), 0.0);
        for (int i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0) continue;
            const double* row = &binv_[std::size_t(i) * std::size_t(m_)];
            for (int k = 0; k < m_; ++k) y[k] += cb * row[k];
        }
        return y;
    }

    std::vector<double> ftran(int j) const {
        std::vector<double> u(std::size_t(m_), 0.0);
        for (int k = 0; k < m_; ++k) {
            const double a = col_entry(k, j);
            if (a == 0) continue;
            for (int i = 0; i < m_; ++i) u[i] += binv_[std::size_t(i) * std::size_t(m_) + std::size_t(k)] * a;
        }
        return u;
    }

    void pivot(int r, int j, const std::vector<double>& u) {
        const std::size_t M = std::size_t(m_);
        const double piv = u[r];
        double* rowr = &binv_[std::size_t(r) * M];
        for (std::size_t k = 0; k < M; ++k) rowr[k] /= piv;
        xb_[r] /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == r || u[i] == 0) continue;
            double* rowi = &binv_[std::size_t(i) * M];
            const double f = u[i];
            for (std::size_t k = 0; k < M; ++k) rowi[k] -= f * rowr[k];
            xb_[i] -= f * xb_[r];
        }
        is_basic_[basis_[r]] = -1;
        basis_[r] = j;
        is_basic_[j] = r;
    }

    // Rebuilds the basis inverse from scratch to shed accumulated rounding.
    void refactor() {
        const std::size_t M = std::size_t(m_);
        std::vector<double> bm(M * M), inv(M * M, 0.0);
        for (int i = 0; i < m_; ++i)
            for (int k = 0; k < m_; ++k) bm[std::size_t(k) * M + std::size_t(i)] = col_entry(k, basis_[i]);
        for (std::size_t i = 0; i < M; ++i) inv[i * M + i] = 1.0;
        for (std::size_t col = 0; col < M; ++col) {
            std::size_t p = col;
            for (std::size_t r = col + 1; r < M; ++r)
                if (std::abs(bm[r * M + col]) > std::abs(bm[p * M + col])) p = r;
            if (bm[p * M + col] == 0) return; // keep the updated inverse
            if (p != col)
                for (std::size_t k = 0; k < M; ++k) {
                    std::swap(bm[p * M + k], bm[col * M + k]);
                    std::swap(inv[p * M + k], inv[col * M + k]);
                }
            const double d = bm[col * M + col];
            for (std::size_t k = 0; k < M; ++k) {
                bm[col * M + k] /= d;
                inv[col * M + k] /= d;
            }
            for (std::size_t r = 0; r < M; ++r) {
                if (r == col) continue;
                const double f = bm[r * M + col];
                if (f == 0) continue;
                for (std::size_t k = 0; k < M; ++k) {
                    bm[r * M + k] -= f * bm[col * M + k];
                    inv[r * M + k] -= f * inv[col * M + k];
                }
            }
        }
        binv_ = std::move(inv);
        for (int i = 0; i < m_; ++i) {
            double s = 0;
            for (int k = 0; k < m_; ++k) s += binv_[std::size_t(i) * M + std::size_t(k)] * bb_[k];
            xb_[i] = s;
        }
    }

    LpStatus run(const std::vector<double>& cost, bool phase1, long& iters) {
        const int ncols = phase1 ? n_ + m_ : n_;
        for (;;) {
            if (iters >= max_iter_) return LpStatus::iteration_limit;
            auto y = duals(cost);
            int enter = -1;
            for (int j = 0; j < ncols; ++j) {
                if (is_basic_[j] >= 0) continue;
                double dj = cost[j];
                if (j < n_) {
                    for (int k = 0; k < m_; ++k) {
                        const double a = lp_.at(k, j);
                        if (a != 0) dj -= y[k] * flip_[k] * a;
                    }
                } else {
                    dj -= y[j - n_];
                }
                if (dj < -tol_) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::optimal;
            auto u = ftran(enter);
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i)
                if (u[i] > tol_) best = std::min(best, std::max(0.0, xb_[i]) / u[i]);
            if (!std::isfinite(best)) return LpStatus::unbounded;
            int leave = -1;
            const double slack = 1e-12 * std::max(1.0, best);
            for (int i = 0; i < m_; ++i) {
                if (u[i] <= tol_ || std::max(0.0, xb_[i]) / u[i] > best + slack) continue;
                if (leave < 0 || basis_[i] < basis_[leave]) leave = i;
            }
            pivot(leave, enter, u);
            ++iters;
            if (iters % 64 == 0) refactor();
        }
    }

    void drive_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < n_) continue;
            for (int j = 0; j < n_; ++j) {
                if (is_basic_[j] >= 0) continue;
                auto u = ftran(j);
                if (std::abs(u[r]) > 1e-9) {
                    pivot(r, j, u);
                    break;
                }
            }
        }
    }

    const DenseLp& lp_;
    int m_, n_;
    double tol_;
    long max_iter_;
    std::vector<double> flip_, bb_, binv_, xb_;
    std::vector<int> basis_, is_basic_;
};

} // namespace detail

inline LpResult solve_lp(const DenseLp& lp, double tol = 1e-9, long max_iter = 200000) {
    require(int(lp.a.size()) == lp.rows * lp.cols, "LP matrix has the wrong size");
    require(int(lp.b.size()) == lp.rows && int(lp.c.size()) == lp.cols, "LP vectors have the wrong size");
    detail::RevisedSimplex rs(lp, tol, max_iter);
    return rs.solve();
}

} // namespace fraccur
