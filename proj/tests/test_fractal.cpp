#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "fraccur/fractal.hpp"
#include "oracles.hpp"

using namespace fraccur;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double log43 = std::log(4.0) / std::log(3.0);

Point pt(double x, double y = 0, double z = 0) { return make_point({x, y, z}); }

std::vector<OccupancySet> random_stars(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> c(0.42, 0.58), r(0.15, 0.3), a(-0.12, 0.12), ph(0, 2 * std::numbers::pi);
    std::vector<OccupancySet> out;
    for (int i = 0; i < n; ++i) {
        std::vector<double> amp, phase;
        for (int j = 0; j < 4; ++j) {
            amp.push_back(a(rng));
            phase.push_back(ph(rng));
        }
        out.push_back(star_domain(pt(c(rng), c(rng)), r(rng), amp, phase));
    }
    return out;
}

// Open sets inside the unit square used for the Whitney checks.
std::vector<OccupancySet> whitney_corpus() {
    std::vector<OccupancySet> v = random_stars(10, 11);
    v.push_back(disk(pt(0.5123, 0.4871), 0.41));
    v.push_back(square(0.0, 1.0));
    v.push_back(square(0.1, 0.77));
    v.push_back(polygon({pt(0.1, 0.1), pt(0.9, 0.2), pt(0.6, 0.5), pt(0.8, 0.9), pt(0.15, 0.7)}));
    v.push_back(koch_snowflake(4, pt(0.5123, 0.4871), 0.6));
    return v;
}

bool ancestor(const Index& big, int kb, const Index& small, int ks, int d) {
    for (int i = 0; i < d; ++i)
        if (detail::floor_div(small[i], std::int64_t(1) << (ks - kb)) != big[i]) return false;
    return true;
}

} // namespace

TEST_CASE("box counts of points use closed cubes", "[fractal]") {
    for (int d = 1; d <= 3; ++d) {
        auto corner = OccupancySet::from_points(d, {pt(0.5, 0.25, 0.75)});
        for (int k = 2; k <= 6; ++k) CHECK(box_count(corner, k) == (1 << d));
        auto generic = OccupancySet::from_points(d, {pt(0.3, 0.3, 0.3)});
        CHECK(box_count(generic, 5) == 1);
    }
    auto two = OccupancySet::from_points(2, {pt(0.3, 0.3), pt(0.31, 0.3)});
    CHECK(box_count(two, 3) == 1);
    CHECK(box_count(two, 10) == 2);
}

TEST_CASE("box counts of segments and boxes match an exhaustive scan", "[fractal]") {
    // [0,1] x {h/2}: every column from -1 to 2^k in one row
    for (int k = 2; k <= 8; ++k) {
        auto s = OccupancySet::from_segments(2, {{pt(0, std::ldexp(0.5, -k)), pt(1, std::ldexp(0.5, -k))}});
        CHECK(box_count(s, k) == (1 << k) + 2);
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::uniform_int_distribution<int> q(0, 16);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Segment> segs;
        std::vector<std::pair<Point, Point>> raw;
        for (int i = 0; i < 3; ++i) {
            // some endpoints on the dyadic grid, some generic
            Point a = trial % 2 ? pt(q(rng) / 16.0, q(rng) / 16.0) : pt(u(rng), u(rng));
            Point b = trial % 3 ? pt(u(rng), u(rng)) : pt(a[0], u(rng));
            segs.push_back({a, b});
            raw.push_back({a, b});
        }
        auto s = OccupancySet::from_segments(2, segs);
        for (int k : {2, 4, 5})
            CHECK(box_count(s, k) == oracle::segment_box_count(raw, k, 0, 1));
    }
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Box> boxes;
        std::vector<std::pair<Point, Point>> raw;
        for (int i = 0; i < 4; ++i) {
            double x0 = trial % 2 ? q(rng) / 16.0 : u(rng), y0 = u(rng);
            Box b;
            b.lo = pt(std::min(x0, 0.9), std::min(y0, 0.9));
            b.hi = pt(std::min(b.lo[0] + u(rng) * 0.2, 1.0), std::min(b.lo[1] + u(rng) * 0.2, 1.0));
            boxes.push_back(b);
            raw.push_back({b.lo, b.hi});
        }
        auto s = OccupancySet::from_boxes(2, boxes);
        for (int k : {1, 3, 5}) CHECK(box_count(s, k) == oracle::rect_box_count(raw, k, 0, 1));
    }
}

TEST_CASE("box counts of rasters and oracle sets", "[fractal]") {
    GridFunction one(2, 4, Index{3, 5}, Index{4, 6}, {1.0});
    auto r = OccupancySet::from_raster(one);
    CHECK(box_count(r, 4) == 9);
    CHECK(box_count(r, 3) == 4); // right and top edges lie on the level-3 grid
    CHECK_THROWS_AS(box_count(r, 5), Error);
    GridFunction half(2, 2, Index{0, 0}, Index{2, 2}, {1.0, 0.0, 0.5, 1.0});
    CHECK_THROWS_AS(OccupancySet::from_raster(half), Error);

    auto sq = square(0.0, 1.0);
    for (int k = 0; k <= 6; ++k) CHECK(box_count(sq, k) == (std::int64_t(1) << (2 * k)));
    auto sq3 = square(0.0, 1.0, 3);
    CHECK(box_count(sq3, 3) == 512);
}

TEST_CASE("box counts are monotone under inclusion", "[fractal]") {
    auto small = disk(pt(0.5, 0.5), 0.2), big = disk(pt(0.5, 0.5), 0.3);
    auto p = OccupancySet::from_points(2, {pt(0.55, 0.45)});
    auto seg = OccupancySet::from_segments(2, {{pt(0.3, 0.5), pt(0.7, 0.5)}});
    auto inner = OccupancySet::from_segments(2, {{pt(0.4, 0.5), pt(0.6, 0.5)}});
    for (int k = 1; k <= 7; ++k) {
        CHECK(box_count(small, k) <= box_count(big, k));
        CHECK(box_count(p, k) <= box_count(small, k));
        CHECK(box_count(inner, k) <= box_count(seg, k));
        CHECK(box_count(seg, k) <= box_count(big, k));
    }
}

TEST_CASE("box dimension estimates", "[fractal]") {
    CHECK_THAT(box_dimension(square(0.0, 1.0), 2, 6).slope, WithinAbs(2.0, 0.05));
    auto seg = OccupancySet::from_segments(2, {{pt(0.0123, 0.3141), pt(0.9871, 0.2718)}});
    CHECK_THAT(box_dimension(seg, 4, 10).slope, WithinAbs(1.0, 0.05));
    CHECK_THROWS_AS(box_dimension(seg, 4, 5), Error);

    // the snowflake boundary at two sizes
    CHECK_THAT(box_dimension(koch_snowflake(8, pt(0.5123, 0.4871), 1.0).boundary(), 3, 7).slope, WithinAbs(log43, 0.05));
    const auto big = box_dimension(koch_snowflake(8, pt(3.3323, 3.3271), 4.0).boundary(), 3, 7);
    CHECK_THAT(big.slope, WithinAbs(log43, 0.05));
    CHECK(big.counts.size() == 5);

    const double cantor = 2 * std::log(2.0) / std::log(3.0);
    CHECK_THAT(box_dimension(cantor_product(1.0 / 3, 9), 3, 8).slope, WithinAbs(cantor, 0.05));
    CHECK_THAT(box_dimension(cantor_product(1.0 / 3, 9, 1), 3, 8).slope, WithinAbs(cantor / 2, 0.05));
}

TEST_CASE("summability verdicts", "[fractal]") {
    auto corner = OccupancySet::from_points(2, {pt(0.5, 0.5)});
    auto s = summability(corner, 0.5, 9);
    CHECK(s.terms[0] == 1.0); // not a corner at level 0
    double partial = 1;
    for (int k = 1; k <= 9; ++k) {
        CHECK_THAT(s.terms[std::size_t(k)], WithinRel(4 * std::exp2(-0.5 * k), 1e-15));
        partial += 4 * std::exp2(-0.5 * k);
    }
    CHECK(s.converging);
    CHECK_THAT(s.ratio, WithinRel(std::exp2(-0.5), 1e-12));
    CHECK_THAT(s.partial.back(), WithinRel(partial, 1e-14));

    auto seg = OccupancySet::from_segments(2, {{pt(0, 0.3), pt(1, 0.3)}});
    auto sg = summability(seg, 1.0, 9);
    CHECK_FALSE(sg.converging);
    CHECK(std::isinf(sg.tail));
    for (double t : sg.terms) CHECK(t >= 1.0);

    auto curve = koch_curve(8);
    CHECK(box_count(curve, 5) == 100);
    CHECK(summability(curve, 1.3, 9).converging);
    CHECK_FALSE(summability(curve, 1.2, 9).converging);
    CHECK_THROWS_AS(summability(curve, -1, 9), Error);
}

TEST_CASE("generators", "[fractal]") {
    // level 0 is the triangle
    auto k0 = koch_snowflake(0, pt(0.5, 0.5), 0.6);
    CHECK_THAT(l1_norm(rasterize(k0, 9)), WithinRel(std::sqrt(3.0) / 4 * 0.36, 0.01));
    CHECK(k0.boundary().segments().size() == 3);
    CHECK(koch_snowflake(3, pt(0.5, 0.5), 0.6).boundary().segments().size() == 192);
    CHECK_THAT(l1_norm(rasterize(koch_snowflake(7, pt(0.5123, 0.4871), 0.6), 9)),
               WithinRel(1.6 * std::sqrt(3.0) / 4 * 0.36, 0.01));
    // bumps point outward
    const double below = 0.5 - 0.3 / std::sqrt(3.0) - 0.25 * 0.2 * std::sqrt(3.0) / 2;
    CHECK(k0.contains(pt(0.5, 0.5)));
    CHECK_FALSE(k0.contains(pt(0.5, below)));
    CHECK(koch_snowflake(1, pt(0.5, 0.5), 0.6).contains(pt(0.5, below)));

    CHECK_THAT(l1_norm(rasterize(disk(pt(0.1, -0.2), 1.0), 8)), WithinRel(std::numbers::pi, 0.01));
    CHECK_THAT(l1_norm(rasterize(polygon({pt(0.1, 0.1), pt(0.6, 0.1), pt(0.6, 0.35), pt(0.1, 0.35)}), 8)),
               WithinRel(0.125, 0.02));
    CHECK(box_count(cantor_product(0.25, 2), 4) == 12 * 12); // each interval is a closed 1/16 cell: 3 cubes

    CHECK_THROWS_AS(disk(pt(0, 0), -1), Error);
    CHECK_THROWS_AS(koch_snowflake(-1), Error);
    CHECK_THROWS_AS(cantor_product(0.6, 3), Error);
    CHECK_THROWS_AS(square(1, 0), Error);
    CHECK_THROWS_AS(polygon({pt(0, 0), pt(1, 0)}), Error);
    CHECK_THROWS_AS(star_domain(pt(0, 0), 1, {0.7, 0.5}, {0, 0}), Error);
}

TEST_CASE("boundary counts", "[fractal]") {
    auto sq = square(0.0, 1.0);
    // only the inner ring holds samples on both sides; the closed boundary meets 8 2^k cubes
    for (int k = 1; k <= 5; ++k) {
        CHECK(boundary_count(sq, k) == 4 * ((std::int64_t(1) << k) - 1));
        CHECK(box_count(OccupancySet::from_boxes(2, {Box{pt(0, 0), pt(1, 0)}, Box{pt(0, 1), pt(1, 1)}, Box{pt(0, 0), pt(0, 1)},
                                                      Box{pt(1, 0), pt(1, 1)}}),
                        k) == 8 * (std::int64_t(1) << k));
    }
    auto poly = polygon({pt(0.1, 0.1), pt(0.6, 0.1), pt(0.6, 0.35), pt(0.1, 0.35)});
    CHECK(boundary_count(poly, 4) == box_count(poly.boundary(), 4));
    CHECK_THROWS_AS(boundary_count(OccupancySet::from_points(2, {pt(0, 0)}), 2), Error);
}

TEST_CASE("whitney: first level on the unit interval and square", "[fractal]") {
    // exhaustive scan over levels 0..5 of the open block test
    for (int d = 1; d <= 2; ++d) {
        auto U = square(0.0, 1.0, d);
        auto w = whitney(U, 5);
        auto scan = oracle::whitney_scan(d, [&](const Point& x) { return U.contains(x); }, 5, 6);
        int k0 = -1;
        for (auto& [k, cubes] : scan)
            if (!cubes.empty() && k0 < 0) k0 = k;
        CHECK(w.k0 == k0);
        CHECK(w.k0 == 2);
    }
    auto w1 = whitney(square(0.0, 1.0, 1), 5);
    REQUIRE(w1.cubes.at(2).size() == 2);
    CHECK(w1.cubes.at(2)[0][0] == 1); // [1/4, 1/2]
    CHECK_THROWS_AS(whitney(disk(pt(0.5, 0.5), 1e-3), 3), Error);
    CHECK_THROWS_AS(whitney(OccupancySet::from_points(2, {pt(0, 0)}), 3), Error);
}

TEST_CASE("whitney: conditions, disjointness and the count bound on the corpus", "[fractal]") {
    const int kmax = 6;
    for (auto& U : whitney_corpus()) {
        INFO(U.name());
        const auto w = whitney(U, kmax);
        // (A) and (B) against an exhaustive rescan at the same sampling
        auto scan = oracle::whitney_scan(2, [&](const Point& x) { return U.contains(x); }, kmax, kmax + 1);
        for (int k = 0; k <= kmax; ++k) {
            std::set<std::vector<std::int64_t>> got;
            for (auto& l : w.cubes.at(k)) got.insert({l[0], l[1]});
            CHECK(got == scan[k]);
            if (k > w.k0) CHECK(w.card[std::size_t(k)] <= w.card_bound(k));
        }
        // pairwise disjoint interiors: no cube is an ancestor of another
        std::vector<std::pair<int, Index>> all;
        for (auto& [k, cubes] : w.cubes)
            for (auto& l : cubes) all.push_back({k, l});
        std::set<std::pair<int, std::vector<std::int64_t>>> keys;
        for (auto& [k, l] : all) keys.insert({k, {l[0], l[1]}});
        bool disjoint = keys.size() == all.size();
        for (auto& [k, l] : all)
            for (int j = 0; j < k && disjoint; ++j)
                disjoint = !keys.count({j, {detail::floor_div(l[0], 1 << (k - j)), detail::floor_div(l[1], 1 << (k - j))}});
        CHECK(disjoint);
        // brute pairwise check on a subsample
        for (std::size_t i = 0; i < std::min<std::size_t>(all.size(), 150); ++i)
            for (std::size_t j = i + 1; j < std::min<std::size_t>(all.size(), 150); ++j) {
                auto [ka, la] = all[i];
                auto [kb, lb] = all[j];
                if (ka > kb) std::swap(ka, kb), std::swap(la, lb);
                CHECK_FALSE(ancestor(la, ka, lb, kb, 2));
            }
    }
}

TEST_CASE("whitney coverage", "[fractal]") {
    auto D = disk(pt(0.5123, 0.4871), 0.4);
    auto w = whitney(D, 9);
    CHECK_THAT(w.covered, WithinRel(std::numbers::pi * 0.16, 0.02));
    // the uncovered strip along the boundary is one cube wide
    auto sq = whitney_chain(square(0.0, 1.0), 0.5, 6);
    double area = 0;
    for (auto& p : sq.dec.parts) area += p.mass;
    CHECK_THAT(area, WithinAbs(std::pow(62.0 / 64, 2), 1e-15));
    CHECK(whitney(square(0.0, 1.0), 8).covered >= 0.98);
}

TEST_CASE("whitney_chain parts", "[fractal]") {
    auto D = disk(pt(0.5123, 0.4871), 0.4);
    const auto w = whitney(D, 7);
    auto cheap = whitney_chain(D, w, 0.5);
    auto exact = whitney_chain(D, w, 0.5, true);
    REQUIRE(cheap.dec.parts.size() == exact.dec.parts.size());
    CHECK_FALSE(cheap.dec.exact);
    for (std::size_t i = 0; i < exact.dec.parts.size(); ++i) {
        const int k = w.k0 + int(i);
        const double card = double(w.card[std::size_t(k)]);
        CHECK(exact.dec.parts[i].mass == card * std::pow(dyadic(k), 2));
        CHECK(exact.dec.parts[i].mass == cheap.dec.parts[i].mass);
        CHECK(exact.dec.parts[i].bmass <= 4 * card * dyadic(k) + 1e-12);
        CHECK(exact.dec.parts[i].bmass <= cheap.dec.parts[i].bmass + 1e-12);
        CHECK(exact.dec.parts[i].flat == exact.dec.parts[i].mass);
        CHECK(exact.cost[i] <= cheap.cost[i] + 1e-12);
    }
    CHECK(cheap.series.converging);
    CHECK(exact.series.converging);
    CHECK(cheap.residual_mass >= 0);
    CHECK(cheap.residual_mass < 0.03);
    CHECK_THAT(cheap.raster_mass, WithinRel(std::numbers::pi * 0.16, 2e-3));
    CHECK_THROWS_AS(whitney_chain(D, w, 1.5), Error);
}

TEST_CASE("whitney_chain cost series on the snowflake", "[fractal][slow]") {
    auto K = koch_snowflake(8, pt(1.6623, 1.6571), 2.0);
    const auto w = whitney(K, 9);
    auto a4 = whitney_chain(K, w, 0.4), a2 = whitney_chain(K, w, 0.2);
    CHECK(a4.series.converging);
    CHECK_FALSE(a2.series.converging);
    CHECK(a2.series.ratio > 1.0);
}

TEST_CASE("fractional perimeter of the snowflake is stable in the generation", "[fractal][slow]") {
    std::vector<double> per;
    for (int gen = 6; gen <= 8; ++gen) per.push_back(frac_perimeter(rasterize(koch_snowflake(gen, pt(0.5123, 0.4871), 0.6), 9), 0.4));
    CHECK_THAT(per[1], WithinRel(per[0], 0.05));
    CHECK_THAT(per[2], WithinRel(per[1], 0.05));
    CHECK(std::isfinite(per[2]));
}
