#include <catch_amalgamated.hpp>

#include <random>

#include "fraccur/lp.hpp"
#include "fraccur/netflow.hpp"

using namespace fraccur;
using Catch::Matchers::WithinAbs;

TEST_CASE("dense simplex solves a textbook LP", "[lp]") {
    // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
    DenseLp lp;
    lp.rows = 3;
    lp.cols = 5;
    lp.a = {1, 0, 1, 0, 0, 0, 2, 0, 1, 0, 3, 2, 0, 0, 1};
    lp.b = {4, 12, 18};
    lp.c = {-3, -5, 0, 0, 0};
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK_THAT(r.objective, WithinAbs(-36, 1e-10));
    CHECK_THAT(r.x[0], WithinAbs(2, 1e-10));
    CHECK_THAT(r.x[1], WithinAbs(6, 1e-10));
    CHECK_THAT(r.dual_objective, WithinAbs(r.objective, 1e-10));
}

TEST_CASE("dense simplex reports infeasible and unbounded problems", "[lp]") {
    DenseLp inf;
    inf.rows = 2;
    inf.cols = 1;
    inf.a = {1, 1};
    inf.b = {1, 2};
    inf.c = {1};
    CHECK(solve_lp(inf).status == LpStatus::infeasible);

    DenseLp unb;
    unb.rows = 1;
    unb.cols = 2;
    unb.a = {1, -1};
    unb.b = {1};
    unb.c = {-1, 0};
    CHECK(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("degenerate LP terminates under Bland's rule", "[lp]") {
    // Beale's cycling example
    DenseLp lp;
    lp.rows = 3;
    lp.cols = 7;
    lp.a = {0.25, -8, -1, 9, 1, 0, 0, 0.5, -12, -0.5, 3, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
    lp.b = {0, 0, 1};
    lp.c = {-0.75, 20, -0.5, 6, 0, 0, 0};
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK_THAT(r.objective, WithinAbs(-1.25, 1e-10));
}

TEST_CASE("network simplex matches the dense simplex on random flow problems", "[lp][netflow]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 6 + rep % 5;
        struct A {
            int s, t;
            double cap, cost;
        };
        std::vector<A> arcs;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && u(rng) < 0.4) arcs.push_back({i, j, std::round(u(rng) * 5 + 1), std::round(u(rng) * 10 - 3)});
        // keep it feasible: a high-cost uncapacitated ring
        for (int i = 0; i < n; ++i) arcs.push_back({i, (i + 1) % n, NetworkSimplex::kInf, 50});
        std::vector<double> supply(std::size_t(n), 0.0);
        for (int k = 0; k < 3; ++k) {
            const int a = int(u(rng) * n), b = int(u(rng) * n);
            const double s = std::round(u(rng) * 4);
            supply[a] += s;
            supply[b] -= s;
        }
        NetworkSimplex ns(n);
        for (auto& a : arcs) ns.add_arc(a.s, a.t, a.cap, a.cost);
        for (int i = 0; i < n; ++i) ns.add_supply(i, supply[i]);
        REQUIRE(ns.run() == NetworkSimplex::Status::optimal);

        // same problem as a dense LP with slack variables for the capacities
        const int m = int(arcs.size());
        int ncap = 0;
        for (auto& a : arcs) ncap += std::isfinite(a.cap);
        DenseLp lp;
        lp.rows = n + ncap;
        lp.cols = m + ncap;
        lp.a.assign(std::size_t(lp.rows * lp.cols), 0.0);
        lp.b.assign(std::size_t(lp.rows), 0.0);
        lp.c.assign(std::size_t(lp.cols), 0.0);
        int row = n;
        for (int e = 0; e < m; ++e) {
            lp.at(arcs[e].s, e) += 1;
            lp.at(arcs[e].t, e) -= 1;
            lp.c[e] = arcs[e].cost;
            if (std::isfinite(arcs[e].cap)) {
                lp.at(row, e) = 1;
                lp.at(row, m + row - n) = 1;
                lp.b[row] = arcs[e].cap;
                ++row;
            }
        }
        for (int i = 0; i < n; ++i) lp.b[i] = supply[i];
        auto r = solve_lp(lp);
        REQUIRE(r.status == LpStatus::optimal);
        CHECK_THAT(ns.total_cost(), WithinAbs(r.objective, 1e-8));
        // potentials certify optimality: reduced costs have the right sign
        for (int e = 0; e < m; ++e) {
            const double rc = arcs[e].cost + ns.potential(arcs[e].s) - ns.potential(arcs[e].t);
            const double f = ns.flow(e);
            if (f > 1e-9) CHECK(rc <= 1e-7);
            if (f < arcs[e].cap - 1e-9) CHECK(rc >= -1e-7);
        }
    }
}
