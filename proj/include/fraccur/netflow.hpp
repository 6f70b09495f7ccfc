#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"

namespace fraccur {

// Primal network simplex for min-cost flow with real costs, capacities and supplies.
// Spanning tree kept as parent/thread/last-successor arrays with a block-search
// pivot rule; an artificial root carries the initial feasible tree.
// Reduced cost of arc a is cost[a] + pi[source] - pi[target].
class NetworkSimplex {
public:
    enum class Status { optimal, infeasible, unbounded };
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    explicit NetworkSimplex(int nodes) : n_(nodes), supply_(std::size_t(nodes), 0.0) {}

    int add_arc(int u, int v, double cap, double cost) {
        require(u >= 0 && u < n_ && v >= 0 && v < n_, "arc endpoint out of range");
        require(cap >= 0, "arc capacity must be nonnegative");
        src_.resize(std::size_t(m_));
        tgt_.resize(std::size_t(m_));
        cap_.resize(std::size_t(m_));
        cost_.resize(std::size_t(m_));
        ++m_;
        src_.push_back(u);
        tgt_.push_back(v);
        cap_.push_back(cap);
        cost_.push_back(cost);
        return m_ - 1;
    }
    void add_supply(int u, double s) { supply_[u] += s; }
    int nodes() const { return n_; }
    int arcs() const { return m_real(); }

    Status run() {
        init();
        while (find_entering()) {
            find_join();
            bool change = find_leaving();
            if (delta_ >= kBig) return Status::unbounded;
            change_flow(change);
            if (change) {
                update_tree();
                update_potential();
            }
            ++pivots_;
        }
        for (int e = m_real(); e < all_; ++e)
            if (flow_[e] > 1e-9 * scale_) return Status::infeasible;
        return Status::optimal;
    }

    double flow(int a) const { return flow_[a]; }
    double potential(int u) const { return pi_[u]; }
    long pivots() const { return pivots_; }
    double total_cost() const {
        double s = 0;
        for (int e = 0; e < m_real(); ++e) s += flow_[e] * cost_[e];
        return s;
    }

private:
    static constexpr int kUp = 1, kDown = -1;
    static constexpr int kLower = 1, kTree = 0, kUpper = -1;
    static constexpr double kBig = 1e300;

    int m_real() const { return m_; }

    void init() {
        const int m = m_real();
        all_ = m + n_;
        root_ = n_;
        const std::size_t N = std::size_t(n_ + 1), A = std::size_t(all_);
        src_.resize(A);
        tgt_.resize(A);
        cap_.resize(A);
        cost_.resize(A);
        flow_.assign(A, 0.0);
        state_.assign(A, kLower);
        parent_.assign(N, -1);
        pred_.assign(N, -1);
        thread_.assign(N, 0);
        rev_thread_.assign(N, 0);
        succ_num_.assign(N, 0);
        last_succ_.assign(N, 0);
        pred_dir_.assign(N, 0);
        pi_.assign(N, 0.0);

        double max_cost = 0;
        scale_ = 1.0;
        for (int e = 0; e < m; ++e) {
            max_cost = std::max(max_cost, std::abs(cost_[e]));
            if (std::isfinite(cap_[e])) scale_ = std::max(scale_, cap_[e]);
        }
        for (int u = 0; u < n_; ++u) scale_ = std::max(scale_, std::abs(supply_[u]));
        double sum = 0;
        for (double s : supply_) sum += s;
        if (std::abs(sum) > 1e-9 * scale_) fail(ErrorKind::precondition, "network supplies do not balance");
        const double art = (max_cost + 1.0) * double(n_ + 1);
        eps_ = 1e-12 * std::max(1.0, max_cost);

        parent_[root_] = -1;
        pred_[root_] = -1;
        thread_[root_] = 0;
        rev_thread_[0] = root_;
        succ_num_[root_] = n_ + 1;
        last_succ_[root_] = root_ - 1;
        pi_[root_] = 0;
        for (int u = 0, e = m; u < n_; ++u, ++e) {
            parent_[u] = root_;
            pred_[u] = e;
            thread_[u] = u + 1;
            rev_thread_[u + 1] = u;
            succ_num_[u] = 1;
            last_succ_[u] = u;
            cap_[e] = kInf;
            state_[e] = kTree;
            if (supply_[u] >= 0) {
                pred_dir_[u] = kUp;
                pi_[u] = 0;
                src_[e] = u;
                tgt_[e] = root_;
                flow_[e] = supply_[u];
                cost_[e] = 0;
            } else {
                pred_dir_[u] = kDown;
                pi_[u] = art;
                src_[e] = root_;
                tgt_[e] = u;
                flow_[e] = -supply_[u];
                cost_[e] = art;
            }
        }
        block_ = std::max(10, int(std::sqrt(double(std::max(1, m)))));
        next_arc_ = 0;
        pivots_ = 0;
    }

    bool find_entering() {
        const int m = m_real();
        if (m == 0) return false;
        double best = -eps_;
        int cnt = block_;
        in_arc_ = -1;
        int e = next_arc_;
        for (int k = 0; k < m; ++k, e = (e + 1 == m ? 0 : e + 1)) {
            const double c = state_[e] * (cost_[e] + pi_[src_[e]] - pi_[tgt_[e]]);
            if (c < best) {
                best = c;
                in_arc_ = e;
            }
            if (--cnt == 0) {
                if (in_arc_ >= 0) {
                    next_arc_ = e + 1 == m ? 0 : e + 1;
                    return true;
                }
                cnt = block_;
            }
        }
        if (in_arc_ < 0) return false;
        next_arc_ = e;
        return true;
    }

    void find_join() {
        int u = src_[in_arc_], v = tgt_[in_arc_];
        while (u != v) {
            if (succ_num_[u] < succ_num_[v])
                u = parent_[u];
            else
                v = parent_[v];
        }
        join_ = u;
    }

    bool find_leaving() {
        if (state_[in_arc_] == kLower) {
            first_ = src_[in_arc_];
            second_ = tgt_[in_arc_];
        } else {
            first_ = tgt_[in_arc_];
            second_ = src_[in_arc_];
        }
        delta_ = std::isfinite(cap_[in_arc_]) ? cap_[in_arc_] : kBig;
        int result = 0;
        for (int u = first_; u != join_; u = parent_[u]) {
            const int e = pred_[u];
            double d = flow_[e];
            bool up = false;
            if (pred_dir_[u] == kDown) {
                d = std::isfinite(cap_[e]) ? cap_[e] - d : kBig;
                up = true;
            }
            if (d < delta_) {
                delta_ = d;
                u_out_ = u;
                out_up_ = up;
                result = 1;
            }
        }
        for (int u = second_; u != join_; u = parent_[u]) {
            const int e = pred_[u];
            double d = flow_[e];
            bool up = false;
            if (pred_dir_[u] == kUp) {
                d = std::isfinite(cap_[e]) ? cap_[e] - d : kBig;
                up = true;
            }
            if (d <= delta_) {
                delta_ = d;
                u_out_ = u;
                out_up_ = up;
                result = 2;
            }
        }
        if (result == 1) {
            u_in_ = first_;
            v_in_ = second_;
        } else {
            u_in_ = second_;
            v_in_ = first_;
        }
        delta_ = std::max(0.0, delta_);
        return result != 0;
    }

    void change_flow(bool change) {
        if (delta_ > 0) {
            const double val = state_[in_arc_] * delta_;
            flow_[in_arc_] += val;
            for (int u = src_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] -= pred_dir_[u] * val;
            for (int u = tgt_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] += pred_dir_[u] * val;
        }
        if (change) {
            state_[in_arc_] = kTree;
            const int e = pred_[u_out_];
            state_[e] = out_up_ ? kUpper : kLower;
            flow_[e] = out_up_ ? cap_[e] : 0.0;
        } else {
            state_[in_arc_] = -state_[in_arc_];
            flow_[in_arc_] = state_[in_arc_] == kUpper ? cap_[in_arc_] : 0.0;
        }
    }

    void update_tree() {
        const int old_rev_thread = rev_thread_[u_out_];
        const int old_succ_num = succ_num_[u_out_];
        const int old_last_succ = last_succ_[u_out_];
        v_out_ = parent_[u_out_];

        if (u_in_ == u_out_) {
            parent_[u_in_] = v_in_;
            pred_[u_in_] = in_arc_;
            pred_dir_[u_in_] = u_in_ == src_[in_arc_] ? kUp : kDown;
            if (thread_[v_in_] != u_out_) {
                int after = thread_[old_last_succ];
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
                after = thread_[v_in_];
                thread_[v_in_] = u_out_;
                rev_thread_[u_out_] = v_in_;
                thread_[old_last_succ] = after;
                rev_thread_[after] = old_last_succ;
            }
        } else {
            const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];
            int stem = u_in_, par_stem = v_in_, next_stem;
            int last = last_succ_[u_in_];
            int before, after = thread_[last];
            thread_[v_in_] = u_in_;
            dirty_.clear();
            dirty_.push_back(v_in_);
            while (stem != u_out_) {
                next_stem = parent_[stem];
                thread_[last] = next_stem;
                dirty_.push_back(last);
                before = rev_thread_[stem];
                thread_[before] = after;
                rev_thread_[after] = before;
                parent_[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
                after = thread_[last];
            }
            parent_[u_out_] = par_stem;
            thread_[last] = thread_continue;
            rev_thread_[thread_continue] = last;
            last_succ_[u_out_] = last;
            if (old_rev_thread != v_in_) {
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
            }
            for (int u : dirty_) rev_thread_[thread_[u]] = u;

            int tmp_sc = 0, tmp_ls = last_succ_[u_out_];
            for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
                pred_[u] = pred_[p];
                pred_dir_[u] = -pred_dir_[p];
                tmp_sc += succ_num_[u] - succ_num_[p];
                succ_num_[u] = tmp_sc;
                last_succ_[p] = tmp_ls;
            }
            pred_[u_in_] = in_arc_;
            pred_dir_[u_in_] = u_in_ == src_[in_arc_] ? kUp : kDown;
            succ_num_[u_in_] = old_succ_num;
        }

        const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
        const int last_succ_out = last_succ_[u_out_];
        for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

        if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
            for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = old_rev_thread;
        } else if (last_succ_out != old_last_succ) {
            for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = last_succ_out;
        }

        for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
        for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
    }

    void update_potential() {
        const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
        const int end = thread_[last_succ_[u_in_]];
        for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
    }

    int n_, m_ = 0;
    std::vector<double> supply_;
    std::vector<int> src_, tgt_;
    std::vector<double> cap_, cost_, flow_;
    std::vector<int> state_;
    std::vector<int> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_, dirty_;
    std::vector<double> pi_;
    int all_ = 0, root_ = 0, block_ = 10, next_arc_ = 0;
    int in_arc_ = -1, join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0, first_ = 0, second_ = 0;
    bool out_up_ = false;
    double delta_ = 0, eps_ = 1e-12, scale_ = 1;
    long pivots_ = 0;
};

} // namespace fraccur
